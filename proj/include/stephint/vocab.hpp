#pragma once

// Token vocabulary shared by chains, policies, and tasks.  A vocabulary is a
// dense id space [0, size) with three distinguished control tokens.

#include "stephint/types.hpp"

#include <optional>

namespace stephint {

struct Vocabulary {
  std::vector<std::string> symbols;
  TokenId end_of_reasoning_id = -1;
  TokenId end_of_sequence_id = -1;
  TokenId answer_marker_id = -1;

  int size() const { return static_cast<int>(symbols.size()); }

  bool contains(TokenId t) const { return t >= 0 && t < size(); }

  const std::string& symbol(TokenId t) const {
    if (!contains(t)) throw ConfigError("symbol: token id out of range");
    return symbols[static_cast<std::size_t>(t)];
  }

  std::optional<TokenId> find(std::string_view s) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
      if (symbols[i] == s) return static_cast<TokenId>(i);
    return std::nullopt;
  }

  std::string decode(std::span<const TokenId> tokens, std::string_view sep = " ") const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += sep;
      out += symbol(tokens[i]);
    }
    return out;
  }

  // Throws ConfigError unless symbols are unique and the three control tokens
  // are distinct in-range ids.
  void validate() const;
};

// Validated constructor.
Vocabulary make_vocabulary(std::vector<std::string> symbols, TokenId end_of_reasoning_id,
                           TokenId end_of_sequence_id, TokenId answer_marker_id);

}  // namespace stephint
