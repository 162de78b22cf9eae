#pragma once

// Reasoning chains and their adaptive stepwise partitioning.
//
// A chain's thought segment is scanned by a scorer that reports, after each
// prefix, the probability that the next token ends the reasoning.  Positions
// where that probability strictly drops are natural step ends (the scorer was
// locally most "done" right before the drop).  A partition picks a fixed
// number of such positions, at least a minimum distance apart, uniformly at
// random among all valid choices, and the resulting prefixes become hints.

#include "stephint/types.hpp"
#include "stephint/vocab.hpp"

namespace stephint {

// Token sequence forming one reasoning chain: thought tokens, optionally
// followed by the end-of-reasoning token and answer tokens.
struct ReasoningChain {
  TokenSeq tokens;
  int length() const { return static_cast<int>(tokens.size()); }
};

// Validated constructor: tokens non-empty, all in-vocabulary, and the
// end-of-reasoning token appears at most once.
ReasoningChain make_chain(const Vocabulary& vocab, TokenSeq tokens);

// Number of tokens strictly before the end-of-reasoning token (chain length
// when the token is absent).
int thought_length(const Vocabulary& vocab, const ReasoningChain& chain);

// probs[i-1] is the scorer's probability that the token after the length-i
// thought prefix is the end-of-reasoning token, for i = 1..thought length.
struct BoundaryTrace {
  std::vector<Scalar> probs;
  int length() const { return static_cast<int>(probs.size()); }
};

// A partition of a length-n thought segment into step_count steps.
// boundaries holds the 1-based prefix lengths ending each step, strictly
// increasing, with boundaries.back() == n.  When fallback_used is false every
// step has length >= min_len; the equal-split fallback only guarantees
// length >= 1.
struct StepPartition {
  std::vector<int> boundaries;
  int step_count = 0;
  int min_len = 0;
  bool fallback_used = false;
};

// Progressive hints: hints[j-1] is the chain prefix through boundary j, for
// j = 1..step_count-1.  Each is a strict prefix of the chain.
struct HintSet {
  std::vector<TokenSeq> hints;
};

// Resolves the minimum step length for a thought of a given length: either a
// fixed token count or a fraction of the thought length (floored, min 1).
struct MinStepPolicy {
  enum class Mode { absolute, fraction };
  Mode mode = Mode::fraction;
  Scalar value = 0.125;

  int resolve(int thought_len) const;
  void validate() const;
};

// Next-token scorer over a fixed vocabulary; may close over a prompt so that
// chain prefixes are scored in context.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual int vocab_size() const = 0;
  // Probability vector (size vocab_size, sums to 1) for the token following
  // `prefix`.
  virtual Vector next_probs(std::span<const TokenId> prefix) const = 0;
};

// All prefix lengths b in [1, n-1] where probs[b-1] > probs[b] strictly:
// the scorer's end-of-reasoning confidence drops after position b.
std::vector<int> candidate_boundaries(const BoundaryTrace& trace);

// Samples a partition of the trace into m steps with minimum step length l:
// m-1 internal boundaries drawn uniformly among all candidate subsets whose
// induced steps all have length >= l, plus the final boundary at n.  When no
// candidate subset is valid, falls back to the equal split
// {floor(j*n/m) : j=1..m} and sets fallback_used.
//
// Throws ConfigError if m < 1 or l < 1, DataError if m*l exceeds the trace
// length (no partition can exist).
StepPartition sample_partition(const BoundaryTrace& trace, int m, int l, Rng& rng);

// Builds the m-1 progressive hint prefixes for a partition of `chain`'s
// thought segment.  Throws ConfigError if the partition does not fit the
// chain.
HintSet build_hints(const ReasoningChain& chain, const StepPartition& partition);

// Scores every thought prefix of the chain with the scorer's end-of-reasoning
// probability.  Throws ConfigError if the scorer's vocabulary size does not
// match.
BoundaryTrace score_boundary_trace(const Vocabulary& vocab, const ReasoningChain& chain,
                                   const TokenScorer& scorer);

}  // namespace stephint
