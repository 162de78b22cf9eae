#include "stephint/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace stephint;

TEST_CASE("pass@k equals the exhaustive combinatorial count") {
  // Worked value: n=8, c=2, k=4 -> 1 - C(6,4)/C(8,4) = 1 - 15/70 = 11/14.
  CHECK(pass_at_k(8, 2, 4) == doctest::Approx(11.0 / 14.0).epsilon(1e-12));

  for (int n = 1; n <= 10; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k)
        CHECK(pass_at_k(n, c, k) ==
              doctest::Approx(oracle::exhaustive_pass_at_k(n, c, k)).epsilon(1e-12));

  // Edge identities.
  CHECK(pass_at_k(64, 0, 32) == 0.0);
  CHECK(pass_at_k(64, 64, 1) == 1.0);
  CHECK(pass_at_k(5, 3, 4) == 1.0);  // k > n - c: some success always drawn
  CHECK(pass_at_k(100, 1, 100) == 1.0);

  CHECK_THROWS_AS(pass_at_k(0, 0, 1), ConfigError);
  CHECK_THROWS_AS(pass_at_k(8, 9, 1), ConfigError);
  CHECK_THROWS_AS(pass_at_k(8, -1, 1), ConfigError);
  CHECK_THROWS_AS(pass_at_k(8, 2, 0), ConfigError);
  CHECK_THROWS_AS(pass_at_k(8, 2, 9), ConfigError);
}

TEST_CASE("evaluation is exact for the perfect teacher and deterministic") {
  const TaskVocabulary tv = make_task_vocabulary(13);
  TaskSpec spec;
  Rng prng(3100);
  std::vector<Problem> problems;
  for (int i = 0; i < 6; ++i) problems.push_back(generate_problem(tv, spec, prng));

  const TeacherPolicy teacher(tv);
  const std::vector<int> grid{1, 2, 4, 8};
  const EvalReport r = evaluate(teacher, tv, problems, 8, grid, 1.0, 64, 77, "teacher");

  CHECK(r.n_samples == 8);
  CHECK(r.k_grid == grid);
  CHECK(r.checkpoint_id == "teacher");
  REQUIRE(r.per_problem.size() == problems.size());
  for (const auto& pp : r.per_problem) {
    CHECK(pp.n == 8);
    CHECK(pp.c == 8);  // the teacher never misses
  }
  for (Scalar v : r.pass_curve) CHECK(v == doctest::Approx(1.0));
  CHECK(r.avg_at_n == doctest::Approx(1.0));

  // A weak random policy: deterministic given the seed, sane aggregates.
  const PolicyParameters params = make_initial_policy(PolicyDims{tv.vocab.size(), 4, 24, 12}, 9);
  const PolicySampler sampler(params, tv.vocab);
  const EvalReport a = evaluate(sampler, tv, problems, 16, grid, 1.0, 48, 88, "rand");
  const EvalReport b = evaluate(sampler, tv, problems, 16, grid, 1.0, 48, 88, "rand");
  REQUIRE(a.per_problem.size() == b.per_problem.size());
  Scalar total_c = 0;
  for (std::size_t i = 0; i < a.per_problem.size(); ++i) {
    CHECK(a.per_problem[i].c == b.per_problem[i].c);
    total_c += a.per_problem[i].c;
  }
  CHECK(a.avg_at_n == doctest::Approx(total_c / (16.0 * problems.size())));
  // The curve matches per-problem recomputation and never decreases in k.
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Scalar mean = 0;
    for (const auto& pp : a.per_problem) mean += pass_at_k(pp.n, pp.c, grid[g]);
    mean /= static_cast<Scalar>(a.per_problem.size());
    CHECK(a.pass_curve[g] == doctest::Approx(mean).epsilon(1e-12));
    if (g > 0) CHECK(a.pass_curve[g] >= a.pass_curve[g - 1] - 1e-12);
  }

  // Grid validation: unsorted, duplicate, or out-of-range entries fail.
  const std::vector<int> unsorted{4, 2};
  CHECK_THROWS_AS(evaluate(teacher, tv, problems, 8, unsorted, 1.0, 64, 1, ""), ConfigError);
  const std::vector<int> dupes{2, 2};
  CHECK_THROWS_AS(evaluate(teacher, tv, problems, 8, dupes, 1.0, 64, 1, ""), ConfigError);
  const std::vector<int> toobig{16};
  CHECK_THROWS_AS(evaluate(teacher, tv, problems, 8, toobig, 1.0, 64, 1, ""), ConfigError);
  CHECK_THROWS_AS(evaluate(teacher, tv, problems, 0, grid, 1.0, 64, 1, ""), ConfigError);
  CHECK_THROWS_AS(evaluate(teacher, tv, {}, 8, grid, 1.0, 64, 1, ""), ConfigError);
}

TEST_CASE("eval reports round-trip through JSON") {
  EvalReport r;
  r.per_problem = {{8, 3}, {8, 0}, {8, 8}};
  r.k_grid = {1, 2, 4};
  r.pass_curve = {0.45833333333333331, 0.7, 0.9};
  r.avg_at_n = 11.0 / 24.0;
  r.n_samples = 8;
  r.temperature = 0.7;
  r.seed = 123456789;
  r.checkpoint_id = "ckpt-300";

  const auto dir = std::filesystem::temp_directory_path() / "stephint_eval_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "eval_report.json";
  write_eval_report(r, path);
  const EvalReport back = read_eval_report(path);
  CHECK(back.k_grid == r.k_grid);
  REQUIRE(back.per_problem.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.per_problem[i].n == r.per_problem[i].n);
    CHECK(back.per_problem[i].c == r.per_problem[i].c);
  }
  REQUIRE(back.pass_curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(back.pass_curve[i] == r.pass_curve[i]);  // bit-exact via 17 digits
  CHECK(back.avg_at_n == r.avg_at_n);
  CHECK(back.n_samples == 8);
  CHECK(back.temperature == 0.7);
  CHECK(back.seed == 123456789);
  CHECK(back.checkpoint_id == "ckpt-300");

  {
    std::ofstream out(path);
    out << "{\"k_grid\": oops";
  }
  CHECK_THROWS_AS(read_eval_report(path), DataError);
  CHECK_THROWS_AS(read_eval_report(dir / "missing.json"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("metrics aggregate the right record subsets") {
  const TaskVocabulary tv = make_task_vocabulary(13);
  const PolicyParameters params = make_initial_policy(PolicyDims{tv.vocab.size(), 4, 24, 12}, 41);
  DatasetParams dp;
  dp.size = 2;
  const auto dataset = build_dataset(tv, dp, 91);
  std::vector<RolloutGroup> groups;
  for (const auto& rec : dataset) {
    Rng rng(derive_seed(910, "roll", groups.size()));
    groups.push_back(collect_group(params, tv, rec, RolloutPlan{}, 1.0, 40, rng));
  }

  const MetricsRecord m = record_metrics(params, 17, groups, 1.0, -0.25, 3.5);
  CHECK(m.update_index == 17);
  CHECK(m.loss == -0.25);
  CHECK(m.grad_norm == 3.5);

  Scalar sampled_r = 0, unhinted_r = 0, all_r = 0, len = 0;
  int sampled_n = 0, unhinted_n = 0, all_n = 0;
  std::vector<PrefixedSequence> sampled;
  for (const auto& g : groups)
    for (const auto& r : g.records) {
      all_r += r.reward;
      ++all_n;
      if (r.condition != RolloutCondition::reference) {
        sampled_r += r.reward;
        len += static_cast<Scalar>(r.completion_tokens.size());
        ++sampled_n;
        sampled.push_back({r.prefix_tokens, r.completion_tokens});
      }
      if (r.condition == RolloutCondition::unhinted) {
        unhinted_r += r.reward;
        ++unhinted_n;
      }
    }
  CHECK(m.reward_mean == doctest::Approx(sampled_r / sampled_n).epsilon(1e-12));
  CHECK(m.reward_mean_unhinted == doctest::Approx(unhinted_r / unhinted_n).epsilon(1e-12));
  CHECK(m.reward_mean_group == doctest::Approx(all_r / all_n).epsilon(1e-12));
  CHECK(m.response_length_mean == doctest::Approx(len / sampled_n).epsilon(1e-12));
  CHECK(m.entropy_mean ==
        doctest::Approx(mean_token_entropy(params, sampled, 1.0)).epsilon(1e-12));
  // Near-uniform init: entropy close to ln(21).
  CHECK(m.entropy_mean > 0.95 * std::log(21.0));
  CHECK(m.entropy_mean < 1.01 * std::log(21.0));
}

TEST_CASE("metrics lines are canonical JSON without wall time") {
  MetricsRecord m;
  m.update_index = 3;
  m.reward_mean = 0.125;
  m.reward_mean_unhinted = 0.0625;
  m.reward_mean_group = 0.25;
  m.entropy_mean = 2.5;
  m.response_length_mean = 17.25;
  m.loss = -0.001953125;
  m.grad_norm = 0.75;
  m.wall_time_s = 123.456;  // must not appear in the line

  const std::string line = to_jsonl(m);
  CHECK(line.find("wall_time") == std::string::npos);
  CHECK(line.find("\"update\":3") != std::string::npos);

  const MetricsRecord back = metrics_from_jsonl(line);
  CHECK(back.update_index == 3);
  CHECK(back.reward_mean == m.reward_mean);
  CHECK(back.reward_mean_unhinted == m.reward_mean_unhinted);
  CHECK(back.reward_mean_group == m.reward_mean_group);
  CHECK(back.entropy_mean == m.entropy_mean);
  CHECK(back.response_length_mean == m.response_length_mean);
  CHECK(back.loss == m.loss);
  CHECK(back.grad_norm == m.grad_norm);
  CHECK(back.wall_time_s == 0.0);

  // Serialization is stable: a re-serialized line is identical.
  CHECK(to_jsonl(back) == line);
  CHECK_THROWS_AS(metrics_from_jsonl("{bad"), DataError);

  const auto dir = std::filesystem::temp_directory_path() / "stephint_metrics_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "metrics.jsonl";
  {
    std::ofstream out(path);
    MetricsRecord a = m, b = m;
    b.update_index = 4;
    out << to_jsonl(a) << "\n" << to_jsonl(b) << "\n";
  }
  const auto all = read_metrics_file(path);
  REQUIRE(all.size() == 2);
  CHECK(all[0].update_index == 3);
  CHECK(all[1].update_index == 4);
  CHECK_THROWS_AS(read_metrics_file(dir / "missing.jsonl"), DataError);
  std::filesystem::remove_all(dir);
}
