#include "stephint/metrics.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace stephint {

using nlohmann::json;

Scalar pass_at_k(int n, int c, int k) {
  if (n < 1) throw ConfigError("pass_at_k: n must be >= 1");
  if (c < 0 || c > n) throw ConfigError("pass_at_k: need 0 <= c <= n");
  if (k < 1 || k > n) throw ConfigError("pass_at_k: need 1 <= k <= n");
  // 1 - C(n-c, k)/C(n, k) = 1 - prod_{i=0}^{k-1} (n-c-i)/(n-i)
  Scalar q = 1.0;
  for (int i = 0; i < k; ++i) {
    const int num = n - c - i;
    if (num <= 0) return 1.0;
    q *= static_cast<Scalar>(num) / static_cast<Scalar>(n - i);
  }
  return 1.0 - q;
}

EvalReport evaluate(const CompletionSampler& sampler, const TaskVocabulary& tv,
                    std::span<const Problem> problems, int n_samples, std::span<const int> k_grid,
                    Scalar temperature, int max_len, std::uint64_t seed,
                    std::string checkpoint_id, int threads) {
  if (problems.empty()) throw ConfigError("evaluate: empty problem set");
  if (n_samples < 1) throw ConfigError("evaluate: n_samples must be >= 1");
  if (k_grid.empty()) throw ConfigError("evaluate: empty k grid");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    if (k_grid[i] < 1 || k_grid[i] > n_samples)
      throw ConfigError("evaluate: k grid values must lie in [1, n_samples]");
    if (i > 0 && k_grid[i] <= k_grid[i - 1])
      throw ConfigError("evaluate: k grid must be strictly ascending");
  }
  if (max_len < 1) throw ConfigError("evaluate: max_len must be >= 1");

  EvalReport report;
  report.k_grid.assign(k_grid.begin(), k_grid.end());
  report.n_samples = n_samples;
  report.temperature = temperature;
  report.seed = seed;
  report.checkpoint_id = std::move(checkpoint_id);

  report.per_problem = ordered_map<EvalReport::PerProblem>(
      problems.size(), threads, [&](std::size_t i) {
        Rng rng(derive_seed(seed, "eval.problem", i));
        EvalReport::PerProblem pp{n_samples, 0};
        for (int s = 0; s < n_samples; ++s) {
          const SampledSequence seq =
              sampler.sample(problems[i].prompt_tokens, temperature, max_len, rng);
          pp.c += verify(tv, problems[i], seq.tokens);
        }
        return pp;
      });

  report.pass_curve.resize(report.k_grid.size(), 0.0);
  long long total_correct = 0;
  for (const auto& pp : report.per_problem) {
    total_correct += pp.c;
    for (std::size_t ki = 0; ki < report.k_grid.size(); ++ki)
      report.pass_curve[ki] += pass_at_k(pp.n, pp.c, report.k_grid[ki]);
  }
  for (auto& v : report.pass_curve) v /= static_cast<Scalar>(report.per_problem.size());
  report.avg_at_n = static_cast<Scalar>(total_correct) /
                    (static_cast<Scalar>(problems.size()) * static_cast<Scalar>(n_samples));
  return report;
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  json per = json::array();
  for (const auto& pp : report.per_problem) per.push_back({{"n", pp.n}, {"c", pp.c}});
  const json j = {{"checkpoint", report.checkpoint_id},
                  {"seed", report.seed},
                  {"temperature", report.temperature},
                  {"n_samples", report.n_samples},
                  {"k_grid", report.k_grid},
                  {"pass_at_k", report.pass_curve},
                  {"avg_at_n", report.avg_at_n},
                  {"per_problem", per}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("write_eval_report: cannot open '" + path.string() + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw DataError("write_eval_report: write failed");
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_eval_report: cannot open '" + path.string() + "'");
  json j;
  try {
    f >> j;
    EvalReport r;
    r.checkpoint_id = j.at("checkpoint").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.temperature = j.at("temperature").get<Scalar>();
    r.n_samples = j.at("n_samples").get<int>();
    r.k_grid = j.at("k_grid").get<std::vector<int>>();
    r.pass_curve = j.at("pass_at_k").get<std::vector<Scalar>>();
    r.avg_at_n = j.at("avg_at_n").get<Scalar>();
    for (const auto& pp : j.at("per_problem"))
      r.per_problem.push_back({pp.at("n").get<int>(), pp.at("c").get<int>()});
    return r;
  } catch (const json::exception& e) {
    throw DataError("read_eval_report: bad report '" + path.string() + "': " + e.what());
  }
}

MetricsRecord record_metrics(const PolicyParameters& params, int update_index,
                             std::span<const RolloutGroup> groups, Scalar temperature,
                             Scalar loss, Scalar grad_norm) {
  MetricsRecord rec;
  rec.update_index = update_index;
  rec.loss = loss;
  rec.grad_norm = grad_norm;

  long long sampled_reward = 0, sampled_count = 0;
  long long unhinted_reward = 0, unhinted_count = 0;
  long long group_reward = 0, group_count = 0;
  long long length_sum = 0;
  std::vector<PrefixedSequence> sampled_seqs;
  for (const auto& g : groups) {
    for (const auto& r : g.records) {
      group_reward += r.reward;
      ++group_count;
      if (r.condition == RolloutCondition::reference) continue;
      sampled_reward += r.reward;
      ++sampled_count;
      length_sum += static_cast<long long>(r.completion_tokens.size());
      sampled_seqs.push_back({r.prefix_tokens, r.completion_tokens});
      if (r.condition == RolloutCondition::unhinted) {
        unhinted_reward += r.reward;
        ++unhinted_count;
      }
    }
  }
  if (sampled_count > 0) {
    rec.reward_mean = static_cast<Scalar>(sampled_reward) / static_cast<Scalar>(sampled_count);
    rec.response_length_mean =
        static_cast<Scalar>(length_sum) / static_cast<Scalar>(sampled_count);
  }
  if (unhinted_count > 0)
    rec.reward_mean_unhinted =
        static_cast<Scalar>(unhinted_reward) / static_cast<Scalar>(unhinted_count);
  if (group_count > 0)
    rec.reward_mean_group = static_cast<Scalar>(group_reward) / static_cast<Scalar>(group_count);
  rec.entropy_mean = mean_token_entropy(params, sampled_seqs, temperature);
  return rec;
}

std::string to_jsonl(const MetricsRecord& r) {
  const json j = {{"update", r.update_index},
                  {"reward_mean", r.reward_mean},
                  {"reward_mean_unhinted", r.reward_mean_unhinted},
                  {"reward_mean_group", r.reward_mean_group},
                  {"entropy_mean", r.entropy_mean},
                  {"response_length_mean", r.response_length_mean},
                  {"loss", r.loss},
                  {"grad_norm", r.grad_norm}};
  return j.dump();
}

std::vector<MetricsRecord> read_metrics_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_metrics_file: cannot open '" + path.string() + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_jsonl(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

MetricsRecord metrics_from_jsonl(const std::string& line) {
  try {
    const json j = json::parse(line);
    MetricsRecord r;
    r.update_index = j.at("update").get<int>();
    r.reward_mean = j.at("reward_mean").get<Scalar>();
    r.reward_mean_unhinted = j.at("reward_mean_unhinted").get<Scalar>();
    r.reward_mean_group = j.at("reward_mean_group").get<Scalar>();
    r.entropy_mean = j.at("entropy_mean").get<Scalar>();
    r.response_length_mean = j.at("response_length_mean").get<Scalar>();
    r.loss = j.at("loss").get<Scalar>();
    r.grad_norm = j.at("grad_norm").get<Scalar>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("metrics_from_jsonl: bad record: ") + e.what());
  }
}

}  // namespace stephint
