#include "stephint/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stephint {

namespace {

void validate_trace(const BoundaryTrace& trace) {
  for (Scalar p : trace.probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw DataError("boundary trace: probabilities must lie in [0, 1]");
}

constexpr std::uint64_t kCountCap = 1ull << 62;

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > kCountCap - b) ? kCountCap : a + b;
}

}  // namespace

ReasoningChain make_chain(const Vocabulary& vocab, TokenSeq tokens) {
  if (tokens.empty()) throw DataError("make_chain: chain must be non-empty");
  int eor_count = 0;
  for (TokenId t : tokens) {
    if (!vocab.contains(t)) throw DataError("make_chain: token id out of vocabulary range");
    if (t == vocab.end_of_reasoning_id) ++eor_count;
  }
  if (eor_count > 1) throw DataError("make_chain: end-of-reasoning token appears more than once");
  return ReasoningChain{std::move(tokens)};
}

int thought_length(const Vocabulary& vocab, const ReasoningChain& chain) {
  for (int i = 0; i < chain.length(); ++i)
    if (chain.tokens[static_cast<std::size_t>(i)] == vocab.end_of_reasoning_id) return i;
  return chain.length();
}

int MinStepPolicy::resolve(int thought_len) const {
  validate();
  if (mode == Mode::absolute) return static_cast<int>(value);
  return std::max(1, static_cast<int>(std::floor(static_cast<Scalar>(thought_len) * value)));
}

void MinStepPolicy::validate() const {
  if (mode == Mode::absolute) {
    if (value < 1.0 || value != std::floor(value))
      throw ConfigError("min step policy: absolute value must be a positive integer");
  } else {
    if (!(value > 0.0 && value <= 1.0))
      throw ConfigError("min step policy: fraction must lie in (0, 1]");
  }
}

std::vector<int> candidate_boundaries(const BoundaryTrace& trace) {
  validate_trace(trace);
  std::vector<int> out;
  for (int b = 1; b + 1 <= trace.length(); ++b)
    if (trace.probs[static_cast<std::size_t>(b - 1)] > trace.probs[static_cast<std::size_t>(b)])
      out.push_back(b);
  return out;
}

StepPartition sample_partition(const BoundaryTrace& trace, int m, int l, Rng& rng) {
  if (m < 1) throw ConfigError("sample_partition: step count must be >= 1");
  if (l < 1) throw ConfigError("sample_partition: min step length must be >= 1");
  validate_trace(trace);
  const int n = trace.length();
  if (static_cast<long long>(m) * l > n)
    throw DataError("sample_partition: no partition exists (step count * min length exceeds trace length)");

  StepPartition part;
  part.step_count = m;
  part.min_len = l;

  const int r = m - 1;  // internal boundaries to place
  if (r == 0) {
    part.boundaries = {n};
    return part;
  }

  const std::vector<int> cands = candidate_boundaries(trace);
  const int K = static_cast<int>(cands.size());

  // ways[i][t]: number of valid completions placing t more boundaries after an
  // internal boundary at cands[i] (the last placed one), ending with a final
  // step of length >= l.  Saturating counts keep the table overflow-safe; the
  // distribution is exact whenever counts stay below 2^53.
  std::vector<std::vector<std::uint64_t>> ways;
  std::uint64_t total = 0;
  if (K >= r) {
    ways.assign(static_cast<std::size_t>(K), std::vector<std::uint64_t>(static_cast<std::size_t>(r), 0));
    for (int i = 0; i < K; ++i)
      ways[static_cast<std::size_t>(i)][0] = (n - cands[static_cast<std::size_t>(i)] >= l) ? 1 : 0;
    for (int t = 1; t < r; ++t)
      for (int i = 0; i < K; ++i) {
        std::uint64_t acc = 0;
        for (int j = i + 1; j < K; ++j)
          if (cands[static_cast<std::size_t>(j)] - cands[static_cast<std::size_t>(i)] >= l)
            acc = sat_add(acc, ways[static_cast<std::size_t>(j)][static_cast<std::size_t>(t - 1)]);
        ways[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = acc;
      }
    for (int i = 0; i < K; ++i)
      if (cands[static_cast<std::size_t>(i)] >= l)
        total = sat_add(total, ways[static_cast<std::size_t>(i)][static_cast<std::size_t>(r - 1)]);
  }

  if (total == 0) {
    // No valid candidate subset: deterministic equal split.
    part.fallback_used = true;
    part.boundaries.resize(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j)
      part.boundaries[static_cast<std::size_t>(j - 1)] =
          static_cast<int>((static_cast<long long>(j) * n) / m);
    return part;
  }

  // Sequential sampling weighted by completion counts draws uniformly over
  // all valid boundary subsets.
  part.boundaries.reserve(static_cast<std::size_t>(m));
  int prev_idx = -1;  // index into cands of the previous boundary
  for (int t = r - 1; t >= 0; --t) {
    Vector w = Vector::Zero(K);
    for (int i = prev_idx + 1; i < K; ++i) {
      const int gap = cands[static_cast<std::size_t>(i)] -
                      (prev_idx < 0 ? 0 : cands[static_cast<std::size_t>(prev_idx)]);
      if (gap >= l)
        w[i] = static_cast<Scalar>(ways[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]);
    }
    prev_idx = static_cast<int>(rng.categorical(w));
    part.boundaries.push_back(cands[static_cast<std::size_t>(prev_idx)]);
  }
  part.boundaries.push_back(n);
  return part;
}

HintSet build_hints(const ReasoningChain& chain, const StepPartition& partition) {
  const auto& b = partition.boundaries;
  if (b.empty() || static_cast<int>(b.size()) != partition.step_count)
    throw ConfigError("build_hints: partition has wrong boundary count");
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j] < 1 || (j > 0 && b[j] <= b[j - 1]))
      throw ConfigError("build_hints: boundaries must be strictly increasing and positive");
  }
  if (b.back() > chain.length()) throw ConfigError("build_hints: partition does not fit the chain");

  HintSet out;
  out.hints.reserve(b.size() - 1);
  for (std::size_t j = 0; j + 1 < b.size(); ++j)
    out.hints.emplace_back(chain.tokens.begin(), chain.tokens.begin() + b[j]);
  return out;
}

BoundaryTrace score_boundary_trace(const Vocabulary& vocab, const ReasoningChain& chain,
                                   const TokenScorer& scorer) {
  if (scorer.vocab_size() != vocab.size())
    throw ConfigError("score_boundary_trace: scorer vocabulary size mismatch");
  const int T = thought_length(vocab, chain);
  BoundaryTrace trace;
  trace.probs.reserve(static_cast<std::size_t>(T));
  for (int i = 1; i <= T; ++i) {
    Vector p = scorer.next_probs(std::span<const TokenId>(chain.tokens.data(), static_cast<std::size_t>(i)));
    if (p.size() != vocab.size())
      throw DataError("score_boundary_trace: scorer returned wrong-sized distribution");
    trace.probs.push_back(p[vocab.end_of_reasoning_id]);
  }
  return trace;
}

}  // namespace stephint
