// Command-line harness: train / eval / compare / partition / entropy-check /
// dataset.  Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 internal error.

#include "stephint/config.hpp"
#include "stephint/grpo.hpp"
#include "stephint/metrics.hpp"
#include "stephint/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace stephint;
using nlohmann::json;

// When STEPHINT_OUT_ROOT is set, relative output directories are created
// under it, so batches of runs can be redirected without editing configs.
// Absolute paths and an unset variable leave the directory untouched.
std::string anchor_out_dir(const std::string& path) {
  const char* root = std::getenv("STEPHINT_OUT_ROOT");
  if (root == nullptr || *root == '\0' || path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(root) / p).string();
}

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;
};

// Every TrainConfig key becomes both a config-file line and a --flag; flags
// override the file, and --set entries are applied last.
void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value config file ('#' comments)");
  cmd->add_option("--set", args.sets, "extra key=value override (repeatable, applied last)");
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key.name,
        [&args, name = key.name](const std::string& v) { args.flag_values[name] = v; }, key.help);
  }
}

TrainConfig build_config(const ConfigArgs& args) {
  TrainConfig c;
  if (!args.config_file.empty()) apply_config_file(c, args.config_file);
  for (const auto& key : config_keys()) {
    const auto it = args.flag_values.find(key.name);
    if (it != args.flag_values.end()) apply_config_entry(c, key.name + "=" + it->second);
  }
  for (const auto& s : args.sets) apply_config_entry(c, s);
  c.finalize();
  return c;
}

void print_report(const EvalReport& report) {
  std::cout << "avg@" << report.n_samples << " = " << report.avg_at_n << '\n';
  for (std::size_t i = 0; i < report.k_grid.size(); ++i)
    std::cout << "pass@" << report.k_grid[i] << " = " << report.pass_curve[i] << '\n';
}

int run_train_cmd(const ConfigArgs& args) {
  TrainConfig config = build_config(args);
  config.out_dir = anchor_out_dir(config.out_dir);
  const TrainRunResult result = run_train(config);
  std::cout << "run dir: " << result.run_dir.string() << '\n';
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::cout << "final update " << last.update_index << ": reward_mean = " << last.reward_mean
              << ", entropy = " << last.entropy_mean << " nats\n";
  }
  print_report(result.final_report);
  return 0;
}

int run_eval_cmd(const ConfigArgs& args, const std::string& checkpoint,
                 const std::string& out_path) {
  const TrainConfig config = build_config(args);
  std::uint64_t ckpt_seed = 0;
  const PolicyParameters params = load_checkpoint(checkpoint, &ckpt_seed);
  const TaskVocabulary tv = make_task_vocabulary(config.modulus);
  if (params.dims.vocab != tv.vocab.size())
    throw ConfigError("eval: checkpoint vocabulary size " + std::to_string(params.dims.vocab) +
                      " does not match modulus " + std::to_string(config.modulus));
  std::vector<Problem> problems;
  for (int i = 0; i < config.eval_problems; ++i) {
    Rng rng(derive_seed(config.seed, "eval.problems", static_cast<std::uint64_t>(i)));
    problems.push_back(generate_problem(tv, config.task_spec(), rng));
  }
  const PolicySampler sampler(params, tv.vocab);
  const EvalReport report =
      evaluate(sampler, tv, problems, config.eval_samples, config.eval_k_grid,
               config.eval_temperature, config.eval_max_len,
               derive_seed(config.seed, "eval.sampling"), checkpoint, config.resolved_threads());
  if (!out_path.empty()) write_eval_report(report, out_path);
  print_report(report);
  return 0;
}

int run_dataset_cmd(const ConfigArgs& args, const std::string& out_path) {
  const TrainConfig config = build_config(args);
  const TaskVocabulary tv = make_task_vocabulary(config.modulus);
  const auto records = build_dataset(tv, config.dataset_params(), config.seed);
  write_dataset(tv, records, config.seed, out_path);
  std::cout << "wrote " << records.size() << " records to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StepHint: hint-conditioned GRPO training on verifiable arithmetic chains"};
  app.footer(
      "If STEPHINT_OUT_ROOT is set, relative output directories (train/compare "
      "out_dir, compare --out) are created under it.");
  app.require_subcommand(1);

  ConfigArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a policy and write run artifacts");
  add_config_options(train_cmd, train_args);

  ConfigArgs eval_args;
  std::string eval_checkpoint, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on held-out problems");
  add_config_options(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "policy checkpoint to evaluate")
      ->required();
  eval_cmd->add_option("--out", eval_out, "write the evaluation report JSON here");

  std::string cmp_config_a, cmp_config_b, cmp_out;
  std::vector<std::string> cmp_sets_a, cmp_sets_b;
  auto* cmp_cmd = app.add_subcommand("compare", "train/load two runs and chart them side by side");
  cmp_cmd->add_option("--config-a", cmp_config_a, "config file for run A")->required();
  cmp_cmd->add_option("--config-b", cmp_config_b, "config file for run B")->required();
  cmp_cmd->add_option("--set-a", cmp_sets_a, "override for run A (key=value, repeatable)");
  cmp_cmd->add_option("--set-b", cmp_sets_b, "override for run B (key=value, repeatable)");
  cmp_cmd->add_option("--out", cmp_out, "directory for comparison.csv and charts")->required();

  std::string part_in, part_out, part_min_mode = "fraction";
  int part_steps = 4;
  double part_min_value = 0.125;
  std::uint64_t part_seed = 1;
  auto* part_cmd = app.add_subcommand("partition", "partition boundary traces from JSONL");
  part_cmd->add_option("--in", part_in, "input traces (JSONL with a 'probs' array per line)")
      ->required();
  part_cmd->add_option("--out", part_out, "output partitions JSONL")->required();
  part_cmd->add_option("--steps", part_steps, "partition step count m");
  part_cmd->add_option("--min-step-mode", part_min_mode, "fraction or absolute");
  part_cmd->add_option("--min-step-value", part_min_value, "min step length value");
  part_cmd->add_option("--seed", part_seed, "random seed");

  int ent_spaces = 50, ent_vocab = 4, ent_max_len = 5;
  std::uint64_t ent_seed = 1;
  std::string ent_out;
  auto* ent_cmd = app.add_subcommand(
      "entropy-check", "verify entropy monotonicity and the chain rule on enumerated spaces");
  ent_cmd->add_option("--spaces", ent_spaces, "number of random policies to enumerate");
  ent_cmd->add_option("--vocab", ent_vocab, "toy vocabulary size (<= 6)");
  ent_cmd->add_option("--max-len", ent_max_len, "generation cap per outcome (<= 8)");
  ent_cmd->add_option("--seed", ent_seed, "random seed");
  ent_cmd->add_option("--out", ent_out, "write the aggregate report JSON here");

  ConfigArgs ds_args;
  std::string ds_out;
  auto* ds_cmd = app.add_subcommand("dataset", "build and write a training dataset");
  add_config_options(ds_cmd, ds_args);
  ds_cmd->add_option("--out", ds_out, "output dataset JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return run_train_cmd(train_args);
    if (eval_cmd->parsed()) return run_eval_cmd(eval_args, eval_checkpoint, eval_out);
    if (cmp_cmd->parsed()) {
      TrainConfig a, b;
      apply_config_file(a, cmp_config_a);
      for (const auto& s : cmp_sets_a) apply_config_entry(a, s);
      a.finalize();
      apply_config_file(b, cmp_config_b);
      for (const auto& s : cmp_sets_b) apply_config_entry(b, s);
      b.finalize();
      a.out_dir = anchor_out_dir(a.out_dir);
      b.out_dir = anchor_out_dir(b.out_dir);
      const std::string cmp_dir = anchor_out_dir(cmp_out);
      run_compare(a, b, cmp_dir);
      std::cout << "wrote comparison artifacts to " << cmp_dir << '\n';
      return 0;
    }
    if (part_cmd->parsed()) {
      PartitionJob job;
      job.step_count = part_steps;
      job.min_step.mode = (part_min_mode == "absolute") ? MinStepPolicy::Mode::absolute
                                                        : MinStepPolicy::Mode::fraction;
      if (part_min_mode != "absolute" && part_min_mode != "fraction")
        throw ConfigError("partition: --min-step-mode must be 'fraction' or 'absolute'");
      job.min_step.value = part_min_value;
      job.seed = part_seed;
      const PartitionOutcome outcome = run_partition(part_in, part_out, job);
      for (const auto& err : outcome.errors) std::cerr << "error: " << err << '\n';
      std::cout << "wrote " << outcome.records_written << " partitions to " << part_out << '\n';
      if (!outcome.ok()) {
        std::cerr << "error: " << outcome.errors.size() << " record(s) failed\n";
        return 3;
      }
      return 0;
    }
    if (ent_cmd->parsed()) {
      EntropyCheckJob job{ent_spaces, ent_vocab, ent_max_len, ent_seed};
      const EntropyCheckResult res = run_entropy_check(job);
      const json j = {{"spaces", res.spaces},
                      {"states_checked", res.states_checked},
                      {"max_violation", res.max_violation},
                      {"chain_rule_max_residual", res.chain_rule_max_residual},
                      {"ok", res.ok}};
      if (!ent_out.empty()) {
        std::ofstream f(ent_out, std::ios::trunc);
        if (!f) throw DataError("entropy-check: cannot write '" + ent_out + "'");
        f << j.dump(2) << '\n';
      }
      std::cout << j.dump(2) << '\n';
      if (!res.ok) {
        std::cerr << "error: entropy identities violated\n";
        return 4;
      }
      return 0;
    }
    if (ds_cmd->parsed()) return run_dataset_cmd(ds_args, ds_out);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
}
