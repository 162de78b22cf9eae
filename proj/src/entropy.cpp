#include "stephint/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stephint {

namespace {

void enumerate_rec(const PolicyParameters& params, const Vocabulary& vocab, TokenSeq& prompt_state,
                   std::size_t prompt_len, Scalar prob, int max_len, EnumeratedSpace& out) {
  const std::size_t depth = prompt_state.size() - prompt_len;
  const TokenDistribution dist = next_distribution(params, prompt_state, 1.0);
  for (TokenId t = 0; t < vocab.size(); ++t) {
    const Scalar p = std::exp(dist.log_probs[t]);
    if (p <= 0) continue;  // zero-probability branches carry no outcome mass
    prompt_state.push_back(t);
    const Scalar child_prob = prob * p;
    const bool terminal = (t == vocab.end_of_sequence_id);
    if (terminal || depth + 1 == static_cast<std::size_t>(max_len)) {
      EnumeratedOutcome o;
      o.tokens.assign(prompt_state.begin() + static_cast<std::ptrdiff_t>(prompt_len),
                      prompt_state.end());
      o.prob = child_prob;
      o.terminated = terminal;
      out.outcomes.push_back(std::move(o));
    } else {
      enumerate_rec(params, vocab, prompt_state, prompt_len, child_prob, max_len, out);
    }
    prompt_state.pop_back();
  }
}

struct NodeStats {
  Scalar mass = 0;
  Scalar entropy = 0;  // of the renormalized outcome distribution under this node
};

// Recursive walk over the implicit outcome tree.  Outcomes are stored in
// lexicographic order, so each node owns a contiguous range [lo, hi).
NodeStats walk(const EnumeratedSpace& space, std::size_t lo, std::size_t hi, std::size_t depth,
               TokenSeq& state, Prop1Report* report) {
  const auto& os = space.outcomes;
  // Leaf: a single outcome that ends exactly here.
  if (hi - lo == 1 && os[lo].tokens.size() == depth) return {os[lo].prob, 0.0};

  NodeStats node;
  std::vector<NodeStats> kids;
  std::size_t i = lo;
  while (i < hi) {
    const TokenId t = os[i].tokens[depth];
    std::size_t j = i;
    while (j < hi && os[j].tokens[depth] == t) ++j;
    state.push_back(t);
    kids.push_back(walk(space, i, j, depth + 1, state, report));
    state.pop_back();
    node.mass += kids.back().mass;
    i = j;
  }
  if (node.mass <= 0) return node;

  Scalar h_token = 0;         // H(t | s)
  Scalar expected_child = 0;  // E_t[H(R | s, t)]
  for (const auto& child : kids) {
    if (child.mass <= 0) continue;
    const Scalar q = child.mass / node.mass;
    h_token -= q * std::log(q);
    expected_child += q * child.entropy;
  }
  node.entropy = h_token + expected_child;

  if (report) {
    ++report->states_checked;
    const Scalar violation = expected_child - node.entropy;
    if (violation > report->max_violation) report->max_violation = violation;
    if (violation > report->monotone_slack && report->violating_states.size() < 8)
      report->violating_states.push_back(state);
    // Direct-sum entropy for the chain-rule residual.
    Scalar direct = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      const Scalar q = os[k].prob / node.mass;
      if (q > 0) direct -= q * std::log(q);
    }
    report->chain_rule_max_residual =
        std::max(report->chain_rule_max_residual, std::abs(direct - (h_token + expected_child)));
  }
  return node;
}

}  // namespace

EnumeratedSpace enumerate_space(const PolicyParameters& params, const Vocabulary& vocab,
                                std::span<const TokenId> prompt, int max_len) {
  if (vocab.size() != params.dims.vocab)
    throw ConfigError("enumerate_space: vocabulary size does not match policy");
  if (vocab.size() > 6) throw ConfigError("enumerate_space: vocabulary too large to enumerate (max 6)");
  if (max_len < 1 || max_len > 8)
    throw ConfigError("enumerate_space: max_len must lie in [1, 8] for exact enumeration");

  EnumeratedSpace space;
  space.prompt.assign(prompt.begin(), prompt.end());
  space.vocab_size = vocab.size();
  space.max_len = max_len;
  space.end_of_sequence_id = vocab.end_of_sequence_id;
  TokenSeq state = space.prompt;
  enumerate_rec(params, vocab, state, space.prompt.size(), 1.0, max_len, space);
  return space;
}

Scalar conditional_entropy(const EnumeratedSpace& space, std::span<const TokenId> generated_prefix) {
  Scalar mass = 0, h = 0;
  for (const auto& o : space.outcomes) {
    if (o.tokens.size() < generated_prefix.size()) continue;
    if (!std::equal(generated_prefix.begin(), generated_prefix.end(), o.tokens.begin())) continue;
    mass += o.prob;
  }
  if (mass <= 0) throw DataError("conditional_entropy: prefix has zero probability");
  for (const auto& o : space.outcomes) {
    if (o.tokens.size() < generated_prefix.size()) continue;
    if (!std::equal(generated_prefix.begin(), generated_prefix.end(), o.tokens.begin())) continue;
    const Scalar q = o.prob / mass;
    if (q > 0) h -= q * std::log(q);
  }
  return h;
}

Prop1Report check_proposition1(const EnumeratedSpace& space) {
  Prop1Report report;
  if (space.outcomes.empty()) throw DataError("check_proposition1: empty space");
  TokenSeq state;
  walk(space, 0, space.outcomes.size(), 0, state, &report);
  return report;
}

Vocabulary make_toy_vocabulary(int size) {
  if (size < 4) throw ConfigError("toy vocabulary: need at least 4 symbols");
  std::vector<std::string> symbols;
  for (int i = 0; i + 3 < size; ++i) symbols.push_back(std::string(1, static_cast<char>('a' + i)));
  symbols.insert(symbols.end(), {"</think>", "=>", "<eos>"});
  return make_vocabulary(std::move(symbols), size - 3, size - 1, size - 2);
}

}  // namespace stephint
