#pragma once

// Tiny autoregressive token policy with a fixed context window.
//
// Forward pass: embed the last `window` tokens (zero vectors for positions
// before the sequence start), concatenate, apply one tanh hidden layer, map
// to vocabulary logits, and temperature-scale into log-probabilities.  All
// parameters live in one flat vector so optimizers and checkpoints treat the
// policy as a single dense point; gradients are computed analytically.

#include "stephint/types.hpp"
#include "stephint/vocab.hpp"

#include <filesystem>

namespace stephint {

struct PolicyDims {
  int vocab = 0;
  int embed = 0;
  int window = 0;
  int hidden = 0;

  void validate() const;
  // vocab*embed + (window*embed + 1)*hidden + (hidden + 1)*vocab
  std::int64_t param_count() const;
  bool operator==(const PolicyDims&) const = default;
};

struct PolicyParameters {
  PolicyDims dims;
  Vector theta;
  // Incremented by every optimizer step; rollouts remember the revision they
  // were collected under so stale experience is rejected.
  std::uint64_t revision = 0;

  // Views into theta, in layout order.  Embeddings are stored one column per
  // token.
  Eigen::Map<const Matrix> embedding() const;       // embed x vocab
  Eigen::Map<const Matrix> hidden_weight() const;   // hidden x (window*embed)
  Eigen::Map<const Vector> hidden_bias() const;     // hidden
  Eigen::Map<const Matrix> output_weight() const;   // vocab x hidden
  Eigen::Map<const Vector> output_bias() const;     // vocab
};

// Uniform random init in (-s, s) per block (biases zero), deterministic in
// the seed.
PolicyParameters make_initial_policy(const PolicyDims& dims, std::uint64_t seed);

struct TokenDistribution {
  Vector logits;     // raw, un-tempered
  Vector log_probs;  // log softmax(logits / temperature)
};

// Distribution over the next token given a context (any length; only the last
// `window` tokens are read).  Throws ConfigError on non-positive temperature
// or out-of-range tokens.
TokenDistribution next_distribution(const PolicyParameters& params,
                                    std::span<const TokenId> context, Scalar temperature);

struct SampledSequence {
  TokenSeq tokens;            // generated tokens, including the terminator if reached
  Vector per_token_log_prob;  // log-prob of each generated token at sampling time
  bool terminated = false;    // true iff end-of-sequence was sampled
};

// Ancestral sampling until end-of-sequence or max_len tokens.
SampledSequence sample_completion(const PolicyParameters& params, const Vocabulary& vocab,
                                  std::span<const TokenId> prefix, Scalar temperature,
                                  int max_len, Rng& rng);

// Log-prob of each continuation token given prefix + earlier continuation
// (teacher forcing).  Empty continuation yields an empty vector.
Vector sequence_log_prob(const PolicyParameters& params, std::span<const TokenId> prefix,
                         std::span<const TokenId> continuation, Scalar temperature = 1.0);

// A generated (or otherwise attributed) token sequence in its prefix context.
struct PrefixedSequence {
  TokenSeq prefix;
  TokenSeq tokens;
};

// Anything that can complete a prefix: a parameterized policy, a scripted
// oracle, etc.  Implementations must be deterministic given the rng state.
class CompletionSampler {
 public:
  virtual ~CompletionSampler() = default;
  virtual SampledSequence sample(std::span<const TokenId> prefix, Scalar temperature, int max_len,
                                 Rng& rng) const = 0;
};

// CompletionSampler view over PolicyParameters (borrows both references).
class PolicySampler : public CompletionSampler {
 public:
  PolicySampler(const PolicyParameters& params, const Vocabulary& vocab)
      : params_(params), vocab_(vocab) {}
  SampledSequence sample(std::span<const TokenId> prefix, Scalar temperature, int max_len,
                         Rng& rng) const override {
    return sample_completion(params_, vocab_, prefix, temperature, max_len, rng);
  }

 private:
  const PolicyParameters& params_;
  const Vocabulary& vocab_;
};

// Mean per-token entropy (nats) of the policy's next-token distributions at
// every position of every item, at the given temperature.  Returns 0 for an
// empty batch.
Scalar mean_token_entropy(const PolicyParameters& params,
                          std::span<const PrefixedSequence> items, Scalar temperature);

// One optimization sample: a continuation scored token-by-token against the
// behavior policy's log-probs, with per-token advantage weights.
struct WeightedSample {
  TokenSeq prefix;
  TokenSeq continuation;
  Vector weights;        // per continuation token
  Vector old_log_probs;  // behavior log-probs, per continuation token
};

struct ObjectiveResult {
  Scalar loss = 0;
  Vector grad;
};

// Clipped-surrogate loss and its gradient in theta.
//
//   loss = -(1/N) sum_i (1/T_i) sum_t [ min(r*w, clip(r,1-eps,1+eps)*w)
//                                       - kl_beta * (lp - lp_ref) ]
//
// with r = exp(lp - old_lp) at temperature 1.  ref_params must be non-null
// iff kl_beta > 0.  Samples with empty continuations contribute nothing but
// still count toward N.
ObjectiveResult objective_gradient(const PolicyParameters& params,
                                   std::span<const WeightedSample> samples, Scalar clip_eps,
                                   Scalar kl_beta, const PolicyParameters* ref_params);

// Binary checkpoint: fixed header (format version, dims, seed) followed by
// the flat parameter vector as little-endian doubles.
void save_checkpoint(const PolicyParameters& params, std::uint64_t seed,
                     const std::filesystem::path& path);
PolicyParameters load_checkpoint(const std::filesystem::path& path,
                                 std::uint64_t* seed_out = nullptr);

}  // namespace stephint
