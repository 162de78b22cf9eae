#include "stephint/trainer.hpp"

#include "stephint/grpo.hpp"
#include "stephint/rollout.hpp"
#include "stephint/svg_chart.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stephint {

namespace {

using nlohmann::json;

std::vector<Problem> held_out_problems(const TaskVocabulary& tv, const TaskSpec& spec, int count,
                                       std::uint64_t seed) {
  std::vector<Problem> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, "eval.problems", static_cast<std::uint64_t>(i)));
    out.push_back(generate_problem(tv, spec, rng));
  }
  return out;
}

struct LoadedRun {
  std::vector<MetricsRecord> metrics;
  EvalReport report;
};

LoadedRun ensure_run(const TrainConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("compare: each run needs an out_dir");
  const std::filesystem::path dir(config.out_dir);
  if (std::filesystem::exists(dir / "metrics.jsonl") &&
      std::filesystem::exists(dir / "eval_report.json")) {
    return {read_metrics_file(dir / "metrics.jsonl"), read_eval_report(dir / "eval_report.json")};
  }
  TrainRunResult res = run_train(config);
  return {std::move(res.metrics), std::move(res.final_report)};
}

std::string csv_num(Scalar v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

TrainRunResult run_train(const TrainConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("run_train: out_dir must be set");
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);

  {
    std::ofstream f(dir / "config.txt", std::ios::trunc);
    if (!f) throw DataError("run_train: cannot write config snapshot");
    f << serialize_config(config);
  }

  const TaskVocabulary tv = make_task_vocabulary(config.modulus);
  const std::vector<DatasetRecord> dataset =
      build_dataset(tv, config.dataset_params(), config.seed);
  write_dataset(tv, dataset, config.seed, dir / "dataset.jsonl");

  PolicyParameters params = make_initial_policy(config.policy_dims(tv.vocab.size()), config.seed);
  PolicyParameters ref_params;
  TrainOptions options;
  options.clip_eps = config.clip_eps;
  options.kl_beta = config.kl_beta;
  options.inner_epochs = config.inner_epochs;
  if (config.kl_beta > 0) {
    ref_params = params;  // the frozen initial policy anchors the KL penalty
    options.ref_params = &ref_params;
  }
  AdamState adam;
  adam.lr = config.learning_rate;

  const RolloutPlan plan = config.rollout_plan();
  const int threads = config.resolved_threads();
  const int B = config.batch_problems;

  std::ofstream metrics_f(dir / "metrics.jsonl", std::ios::trunc);
  std::ofstream timings_f(dir / "timings.jsonl", std::ios::trunc);
  if (!metrics_f || !timings_f) throw DataError("run_train: cannot open metrics streams");

  TrainRunResult result;
  result.run_dir = dir;
  result.metrics.reserve(static_cast<std::size_t>(config.updates));

  for (int u = 0; u < config.updates; ++u) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<RolloutGroup> groups = ordered_map<RolloutGroup>(
        static_cast<std::size_t>(B), threads, [&](std::size_t slot) {
          const std::uint64_t tick = static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(B) +
                                     static_cast<std::uint64_t>(slot);
          Rng rng(derive_seed(config.seed, "rollout", tick));
          const DatasetRecord& rec = dataset[static_cast<std::size_t>(tick) % dataset.size()];
          return collect_group(params, tv, rec, plan, config.temperature, config.rollout_max_len,
                               rng);
        });
    const UpdateResult res = train_update(params, groups, options, adam);
    MetricsRecord rec =
        record_metrics(params, u, groups, config.temperature, res.loss, res.grad_norm);
    rec.wall_time_s =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
    metrics_f << to_jsonl(rec) << '\n';
    timings_f << json{{"update", u}, {"wall_time_s", rec.wall_time_s}}.dump() << '\n';
    result.metrics.push_back(std::move(rec));

    if (config.checkpoint_every > 0 && (u + 1) % config.checkpoint_every == 0) {
      std::ostringstream name;
      name << "checkpoint_" << std::setfill('0') << std::setw(6) << (u + 1) << ".bin";
      save_checkpoint(params, config.seed, dir / name.str());
    }
  }
  metrics_f.flush();
  timings_f.flush();
  if (!metrics_f || !timings_f) throw DataError("run_train: metrics stream write failed");

  save_checkpoint(params, config.seed, dir / "checkpoint.bin");

  const std::vector<Problem> problems =
      held_out_problems(tv, config.task_spec(), config.eval_problems, config.seed);
  const PolicySampler sampler(params, tv.vocab);
  result.final_report =
      evaluate(sampler, tv, problems, config.eval_samples, config.eval_k_grid,
               config.eval_temperature, config.eval_max_len,
               derive_seed(config.seed, "eval.sampling"), "checkpoint.bin", threads);
  write_eval_report(result.final_report, dir / "eval_report.json");
  return result;
}

void run_compare(const TrainConfig& config_a, const TrainConfig& config_b,
                 const std::filesystem::path& out_dir) {
  const LoadedRun a = ensure_run(config_a);
  const LoadedRun b = ensure_run(config_b);
  std::filesystem::create_directories(out_dir);

  const std::string la = config_a.mode + "_a";
  const std::string lb = config_b.mode + "_b";
  const std::size_t n = std::min(a.metrics.size(), b.metrics.size());

  {
    std::ofstream f(out_dir / "comparison.csv", std::ios::trunc);
    if (!f) throw DataError("compare: cannot write comparison.csv");
    f << "update,reward_mean_" << la << ",reward_mean_" << lb << ",entropy_" << la << ",entropy_"
      << lb << ",response_length_" << la << ",response_length_" << lb << "\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ra = a.metrics[i];
      const auto& rb = b.metrics[i];
      f << ra.update_index << ',' << csv_num(ra.reward_mean) << ',' << csv_num(rb.reward_mean)
        << ',' << csv_num(ra.entropy_mean) << ',' << csv_num(rb.entropy_mean) << ','
        << csv_num(ra.response_length_mean) << ',' << csv_num(rb.response_length_mean) << '\n';
    }
    if (!f) throw DataError("compare: comparison.csv write failed");
  }

  const auto curve = [&](const std::vector<MetricsRecord>& ms, auto field) {
    ChartSeries s;
    for (const auto& m : ms) {
      s.xs.push_back(static_cast<Scalar>(m.update_index));
      s.ys.push_back(m.*field);
    }
    return s;
  };
  const auto chart = [&](const std::string& title, const std::string& ylabel, auto field,
                         const std::filesystem::path& path) {
    ChartSpec spec;
    spec.title = title;
    spec.x_label = "update";
    spec.y_label = ylabel;
    ChartSeries sa = curve(a.metrics, field);
    sa.name = la;
    ChartSeries sb = curve(b.metrics, field);
    sb.name = lb;
    spec.series = {std::move(sa), std::move(sb)};
    write_line_chart(spec, path);
  };
  chart("Mean reward (sampled completions)", "reward", &MetricsRecord::reward_mean,
        out_dir / "reward.svg");
  chart("Mean policy entropy", "entropy (nats)", &MetricsRecord::entropy_mean,
        out_dir / "entropy.svg");
  chart("Mean response length", "tokens", &MetricsRecord::response_length_mean,
        out_dir / "response_length.svg");

  ChartSpec pk;
  pk.title = "pass@k (held-out problems)";
  pk.x_label = "k";
  pk.y_label = "pass@k";
  pk.log2_x = true;
  ChartSeries pa, pb;
  pa.name = la;
  for (std::size_t i = 0; i < a.report.k_grid.size(); ++i) {
    pa.xs.push_back(static_cast<Scalar>(a.report.k_grid[i]));
    pa.ys.push_back(a.report.pass_curve[i]);
  }
  pb.name = lb;
  for (std::size_t i = 0; i < b.report.k_grid.size(); ++i) {
    pb.xs.push_back(static_cast<Scalar>(b.report.k_grid[i]));
    pb.ys.push_back(b.report.pass_curve[i]);
  }
  pk.series = {std::move(pa), std::move(pb)};
  write_line_chart(pk, out_dir / "pass_at_k.svg");
}

PartitionOutcome run_partition(const std::filesystem::path& traces_in,
                               const std::filesystem::path& partitions_out,
                               const PartitionJob& job) {
  if (job.step_count < 1) throw ConfigError("partition: step count must be >= 1");
  job.min_step.validate();
  std::ifstream in(traces_in);
  if (!in) throw DataError("partition: cannot open '" + traces_in.string() + "'");
  std::ofstream out(partitions_out, std::ios::trunc);
  if (!out) throw DataError("partition: cannot open '" + partitions_out.string() + "' for writing");

  PartitionOutcome outcome;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    // Bad records are collected, not fatal: every remaining line still gets
    // processed, and the caller decides how a partial failure exits.
    try {
      const json j = json::parse(line);
      BoundaryTrace trace;
      trace.probs = j.at("probs").get<std::vector<Scalar>>();
      const int l = job.min_step.resolve(trace.length());
      Rng rng(derive_seed(job.seed, "partition", lineno));
      const StepPartition part = sample_partition(trace, job.step_count, l, rng);
      json rec = {{"probs", trace.probs},
                  {"boundaries", part.boundaries},
                  {"m", part.step_count},
                  {"l", part.min_len},
                  {"fallback_used", part.fallback_used}};
      if (j.contains("tokens")) rec["tokens"] = j.at("tokens");
      out << rec.dump() << '\n';
      ++outcome.records_written;
    } catch (const json::exception& e) {
      outcome.errors.push_back(traces_in.string() + ":" + std::to_string(lineno) +
                               ": bad trace record: " + e.what());
    } catch (const std::exception& e) {
      outcome.errors.push_back(traces_in.string() + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  if (!out) throw DataError("partition: write failed for '" + partitions_out.string() + "'");
  return outcome;
}

EntropyCheckResult run_entropy_check(const EntropyCheckJob& job) {
  if (job.spaces < 1) throw ConfigError("entropy check: spaces must be >= 1");
  const Vocabulary vocab = make_toy_vocabulary(job.vocab_size);
  EntropyCheckResult result;
  result.spaces = job.spaces;
  result.ok = true;
  result.max_violation = -std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < job.spaces; ++i) {
    PolicyParameters params = make_initial_policy(
        {vocab.size(), 4, 4, 8}, derive_seed(job.seed, "entropy.policy", static_cast<std::uint64_t>(i)));
    // Sharpen the near-uniform initialization so the identities are exercised
    // on strongly non-uniform distributions too.
    params.theta *= 8.0;
    const EnumeratedSpace space = enumerate_space(params, vocab, {}, job.max_len);
    const Prop1Report report = check_proposition1(space);
    result.states_checked += report.states_checked;
    result.max_violation = std::max(result.max_violation, report.max_violation);
    result.chain_rule_max_residual =
        std::max(result.chain_rule_max_residual, report.chain_rule_max_residual);
    result.ok = result.ok && report.ok();
  }
  return result;
}

}  // namespace stephint
