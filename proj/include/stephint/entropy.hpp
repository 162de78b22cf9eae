#pragma once

// Exact solution-space enumeration for tiny policies, and verification that
// revealing more of a reasoning chain never raises the expected entropy of
// the remaining outcome distribution.
//
// An outcome is a complete generation from the prompt: it ends with the
// end-of-sequence token, or it reached the length cap, in which case the
// truncated sequence stands in for all of its continuations as one aggregate
// outcome.  Outcome probabilities are exact products of the policy's
// next-token probabilities, so entropies and the chain-rule identity can be
// checked to floating-point accuracy.

#include "stephint/policy.hpp"
#include "stephint/types.hpp"
#include "stephint/vocab.hpp"

#include <limits>

namespace stephint {

struct EnumeratedOutcome {
  TokenSeq tokens;  // generated tokens only (prompt excluded)
  Scalar prob = 0;
  bool terminated = false;  // true iff the last token is end-of-sequence
};

struct EnumeratedSpace {
  TokenSeq prompt;
  std::vector<EnumeratedOutcome> outcomes;  // lexicographic by token sequence
  int vocab_size = 0;
  int max_len = 0;
  TokenId end_of_sequence_id = -1;
};

// Full enumeration guardrails: vocabulary size <= 6 and max_len <= 8 keep the
// space below ~1.7M outcomes.  Throws ConfigError beyond the guard.
EnumeratedSpace enumerate_space(const PolicyParameters& params, const Vocabulary& vocab,
                                std::span<const TokenId> prompt, int max_len);

// Entropy (nats) of the outcome distribution conditioned on a generated
// prefix.  A complete chain gives 0; a zero-probability prefix is a DataError.
Scalar conditional_entropy(const EnumeratedSpace& space, std::span<const TokenId> generated_prefix);

struct Prop1Report {
  std::int64_t states_checked = 0;
  // max over states of (expected child entropy - state entropy); <= slack
  // everywhere when the proposition holds.
  Scalar max_violation = -std::numeric_limits<Scalar>::infinity();
  // max over states of |H(state) - (H(next token) + expected child entropy)|
  Scalar chain_rule_max_residual = 0;
  Scalar monotone_slack = 1e-12;
  Scalar chain_rule_tol = 1e-10;
  std::vector<TokenSeq> violating_states;  // first few, if any

  bool ok() const {
    return max_violation <= monotone_slack && chain_rule_max_residual < chain_rule_tol;
  }
};

// Walks every reachable internal state of the space and checks, exactly:
//   (monotonicity)  E_t[H(R | s, t)] <= H(R | s)
//   (chain rule)    H(R | s) = H(t | s) + E_t[H(R | s, t)]
Prop1Report check_proposition1(const EnumeratedSpace& space);

// Minimal vocabulary for entropy experiments: content symbols plus the three
// control tokens at the top of the id range.
Vocabulary make_toy_vocabulary(int size);

}  // namespace stephint
