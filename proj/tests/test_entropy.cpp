#include "stephint/entropy.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace stephint;

namespace {

// Direct product-of-conditionals recomputation of one outcome's probability.
// A truncated aggregate's probability is the plain product over its tokens:
// it stands in for all continuations, whose conditionals sum to one.
Scalar outcome_prob(const PolicyParameters& params, const TokenSeq& prompt,
                    const TokenSeq& generated) {
  TokenSeq ctx = prompt;
  Scalar p = 1;
  for (TokenId t : generated) {
    const auto lp = oracle::naive_log_probs(params.dims, params.theta.data(), ctx, 1.0);
    p *= std::exp(lp[static_cast<std::size_t>(t)]);
    ctx.push_back(t);
  }
  return p;
}

Scalar manual_conditional_entropy(const EnumeratedSpace& space, const TokenSeq& prefix) {
  Scalar mass = 0;
  std::vector<Scalar> ps;
  for (const auto& o : space.outcomes) {
    if (o.tokens.size() < prefix.size()) continue;
    if (!std::equal(prefix.begin(), prefix.end(), o.tokens.begin())) continue;
    mass += o.prob;
    ps.push_back(o.prob);
  }
  REQUIRE(mass > 0);
  Scalar h = 0;
  for (Scalar p : ps) {
    const Scalar q = p / mass;
    if (q > 0) h -= q * std::log(q);
  }
  return h;
}

}  // namespace

TEST_CASE("toy vocabularies put controls at the top of the id range") {
  const Vocabulary v = make_toy_vocabulary(5);
  CHECK(v.size() == 5);
  CHECK(v.end_of_reasoning_id == 2);
  CHECK(v.answer_marker_id == 3);
  CHECK(v.end_of_sequence_id == 4);
  CHECK(v.symbol(0) == "a");
  CHECK(v.symbol(1) == "b");
  CHECK(v.symbol(2) == "</think>");
  CHECK(v.symbol(3) == "=>");
  CHECK(v.symbol(4) == "<eos>");
  CHECK_THROWS_AS(make_toy_vocabulary(3), ConfigError);
}

TEST_CASE("enumeration covers the space exactly") {
  const Vocabulary vocab = make_toy_vocabulary(4);
  const PolicyDims dims{4, 3, 3, 6};
  const PolicyParameters params = make_initial_policy(dims, 17);
  const TokenSeq prompt{0};
  const int max_len = 3;
  const EnumeratedSpace space = enumerate_space(params, vocab, prompt, max_len);

  CHECK(space.vocab_size == 4);
  CHECK(space.max_len == max_len);
  CHECK(space.end_of_sequence_id == vocab.end_of_sequence_id);

  // Total mass is exactly one (up to rounding).
  Scalar mass = 0;
  for (const auto& o : space.outcomes) mass += o.prob;
  CHECK(std::abs(mass - 1.0) <= 1e-12);

  // Count: sequences ending in eos at depth 1..3, plus truncated aggregates
  // at depth 3.  With V=4 (3 non-terminal tokens): 1 + 3 + 9 terminated,
  // 9*3 = 27 truncated.
  int terminated = 0, truncated = 0;
  for (const auto& o : space.outcomes) (o.terminated ? terminated : truncated)++;
  CHECK(terminated == 1 + 3 + 9);
  CHECK(truncated == 27);

  // Lexicographic order, termination flag, and per-outcome probabilities.
  for (std::size_t i = 0; i < space.outcomes.size(); ++i) {
    const auto& o = space.outcomes[i];
    REQUIRE(!o.tokens.empty());
    CHECK(o.terminated == (o.tokens.back() == vocab.end_of_sequence_id));
    if (!o.terminated) CHECK(static_cast<int>(o.tokens.size()) == max_len);
    if (i > 0) CHECK(space.outcomes[i - 1].tokens < o.tokens);
    const Scalar ref = outcome_prob(params, prompt, o.tokens);
    CHECK(std::abs(o.prob - ref) <= 1e-13);
  }

  // Enumeration guards.
  CHECK_THROWS_AS(enumerate_space(params, vocab, prompt, 9), ConfigError);
  CHECK_THROWS_AS(enumerate_space(params, vocab, prompt, 0), ConfigError);
  const Vocabulary big = make_toy_vocabulary(7);
  const PolicyParameters bigp = make_initial_policy(PolicyDims{7, 3, 3, 6}, 1);
  CHECK_THROWS_AS(enumerate_space(bigp, big, prompt, 3), ConfigError);
}

TEST_CASE("conditional entropy matches a direct filter-and-renormalize") {
  const Vocabulary vocab = make_toy_vocabulary(5);
  const PolicyParameters params = make_initial_policy(PolicyDims{5, 3, 4, 8}, 23);
  const TokenSeq prompt{0, 1};
  const EnumeratedSpace space = enumerate_space(params, vocab, prompt, 4);

  CHECK(conditional_entropy(space, TokenSeq{}) ==
        doctest::Approx(manual_conditional_entropy(space, {})).epsilon(1e-12));
  for (TokenId first = 0; first < 5; ++first) {
    const TokenSeq prefix{first};
    CHECK(conditional_entropy(space, prefix) ==
          doctest::Approx(manual_conditional_entropy(space, prefix)).epsilon(1e-12));
  }
  const TokenSeq two{0, 0};
  CHECK(conditional_entropy(space, two) ==
        doctest::Approx(manual_conditional_entropy(space, two)).epsilon(1e-12));

  // A complete outcome has nothing left to decide.
  CHECK(conditional_entropy(space, TokenSeq{static_cast<TokenId>(vocab.end_of_sequence_id)}) ==
        doctest::Approx(0.0));

  // Nothing follows end-of-sequence: that prefix has zero mass.
  CHECK_THROWS_AS(conditional_entropy(space, TokenSeq{vocab.end_of_sequence_id, 0}), DataError);
}

TEST_CASE("revealing a token never raises expected remaining entropy") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const Vocabulary vocab = make_toy_vocabulary(5);
    PolicyParameters params = make_initial_policy(PolicyDims{5, 4, 4, 8}, seed);
    if (seed % 2 == 0) params.theta *= 8.0;  // sharpened, far-from-uniform policies too
    const TokenSeq prompt{0, 1, 2};
    const EnumeratedSpace space = enumerate_space(params, vocab, prompt, 5);
    const Prop1Report report = check_proposition1(space);
    CHECK(report.states_checked > 0);
    CHECK(report.ok());
    CHECK(report.max_violation <= report.monotone_slack);
    CHECK(report.chain_rule_max_residual < report.chain_rule_tol);
    CHECK(report.violating_states.empty());
  }
}

TEST_CASE("uniform policies have near-log-V outcome entropy per step") {
  // A fresh tiny-init policy is near uniform, so the root's next-token
  // entropy is close to ln(V); the chain-rule residual is exact regardless.
  const Vocabulary vocab = make_toy_vocabulary(4);
  const PolicyParameters params = make_initial_policy(PolicyDims{4, 3, 3, 6}, 29);
  const EnumeratedSpace space = enumerate_space(params, vocab, TokenSeq{0}, 2);

  const Scalar h_root = conditional_entropy(space, {});
  // Max possible: ln 4 per position over two positions.
  CHECK(h_root > 0.9 * std::log(4.0));
  CHECK(h_root <= 2.0 * std::log(4.0) + 1e-12);

  const Prop1Report report = check_proposition1(space);
  CHECK(report.ok());
}
