#pragma once

// Run orchestration: full training runs with all artifacts, two-run
// comparisons with charts, standalone trace partitioning, and the
// entropy-identity batch check.

#include "stephint/config.hpp"
#include "stephint/entropy.hpp"
#include "stephint/metrics.hpp"
#include "stephint/types.hpp"

#include <filesystem>

namespace stephint {

struct TrainRunResult {
  std::filesystem::path run_dir;
  std::vector<MetricsRecord> metrics;
  EvalReport final_report;
};

// Trains per `config` (which must be finalized) and writes into
// config.out_dir: config.txt, dataset.jsonl, metrics.jsonl, timings.jsonl,
// periodic + final checkpoints, and eval_report.json.  Every byte of
// dataset.jsonl, metrics.jsonl, checkpoints, and eval_report.json is a pure
// function of the config; timings.jsonl is the only artifact that varies
// between reruns.
TrainRunResult run_train(const TrainConfig& config);

// Ensures both runs exist (training any that are missing), then writes
// comparison.csv plus reward/entropy/response-length curves and the pass@k
// chart into out_dir.
void run_compare(const TrainConfig& config_a, const TrainConfig& config_b,
                 const std::filesystem::path& out_dir);

struct PartitionJob {
  int step_count = 4;
  MinStepPolicy min_step;
  std::uint64_t seed = 1;
};

struct PartitionOutcome {
  int records_written = 0;
  std::vector<std::string> errors;  // "file:line: message" per bad record

  bool ok() const { return errors.empty(); }
};

// Reads boundary traces (JSONL: {"probs": [...], optional "tokens": [...]})
// and writes one partition record per line: tokens (if given), probs,
// boundaries, m, l, fallback_used.  Malformed or infeasible lines are
// collected as errors (with line numbers) and skipped; processing continues,
// so a partial failure still writes every good record.  An unreadable input
// or unwritable output is still a hard DataError.
PartitionOutcome run_partition(const std::filesystem::path& traces_in,
                               const std::filesystem::path& partitions_out,
                               const PartitionJob& job);

struct EntropyCheckJob {
  int spaces = 50;
  int vocab_size = 4;
  int max_len = 5;
  std::uint64_t seed = 1;
};

struct EntropyCheckResult {
  int spaces = 0;
  std::int64_t states_checked = 0;
  Scalar max_violation = 0;
  Scalar chain_rule_max_residual = 0;
  bool ok = false;
};

// Enumerates `spaces` random tiny policies and checks the entropy
// monotonicity and chain-rule identities on every reachable state.
EntropyCheckResult run_entropy_check(const EntropyCheckJob& job);

}  // namespace stephint
