#include "stephint/vocab.hpp"

#include <unordered_set>

namespace stephint {

void Vocabulary::validate() const {
  if (symbols.size() < 4)
    throw ConfigError("vocabulary: need at least four symbols (three control tokens plus content)");
  std::unordered_set<std::string_view> seen;
  for (const auto& s : symbols) {
    if (s.empty()) throw ConfigError("vocabulary: empty symbol");
    if (!seen.insert(s).second) throw ConfigError("vocabulary: duplicate symbol '" + s + "'");
  }
  for (TokenId t : {end_of_reasoning_id, end_of_sequence_id, answer_marker_id})
    if (!contains(t)) throw ConfigError("vocabulary: control token id out of range");
  if (end_of_reasoning_id == end_of_sequence_id || end_of_reasoning_id == answer_marker_id ||
      end_of_sequence_id == answer_marker_id)
    throw ConfigError("vocabulary: control token ids must be distinct");
}

Vocabulary make_vocabulary(std::vector<std::string> symbols, TokenId end_of_reasoning_id,
                           TokenId end_of_sequence_id, TokenId answer_marker_id) {
  Vocabulary v{std::move(symbols), end_of_reasoning_id, end_of_sequence_id, answer_marker_id};
  v.validate();
  return v;
}

}  // namespace stephint
