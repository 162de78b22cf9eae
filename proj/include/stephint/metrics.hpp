#pragma once

// Evaluation and training telemetry: the unbiased pass@k estimator, held-out
// evaluation over a problem set, and the per-update metrics record.

#include "stephint/policy.hpp"
#include "stephint/rollout.hpp"
#include "stephint/tasks.hpp"
#include "stephint/types.hpp"

#include <filesystem>

namespace stephint {

// Unbiased estimator 1 - C(n-c, k)/C(n, k), evaluated as a stable product.
// Requires 0 <= c <= n and 1 <= k <= n.
Scalar pass_at_k(int n, int c, int k);

struct EvalReport {
  struct PerProblem {
    int n = 0;  // samples drawn
    int c = 0;  // correct samples
  };
  std::vector<PerProblem> per_problem;
  std::vector<int> k_grid;
  std::vector<Scalar> pass_curve;  // mean pass@k over problems, aligned with k_grid
  Scalar avg_at_n = 0;             // mean per-sample reward
  int n_samples = 0;
  Scalar temperature = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
};

// Draws n_samples completions per problem (independent substream per problem,
// so the report is identical for any thread count) and scores the pass@k
// curve on the grid.  Grid values must be ascending, unique, and <= n_samples.
EvalReport evaluate(const CompletionSampler& sampler, const TaskVocabulary& tv,
                    std::span<const Problem> problems, int n_samples, std::span<const int> k_grid,
                    Scalar temperature, int max_len, std::uint64_t seed,
                    std::string checkpoint_id, int threads = 1);

void write_eval_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_eval_report(const std::filesystem::path& path);

struct MetricsRecord {
  int update_index = 0;
  Scalar reward_mean = 0;           // sampled completions (reference excluded)
  Scalar reward_mean_unhinted = 0;  // unhinted completions only
  Scalar reward_mean_group = 0;     // every record, reference included
  Scalar entropy_mean = 0;          // mean policy entropy over sampled tokens (nats)
  Scalar response_length_mean = 0;  // completion tokens only, hints excluded
  Scalar loss = 0;
  Scalar grad_norm = 0;
  Scalar wall_time_s = 0;  // kept out of the serialized stream (see to_jsonl)
};

// Aggregates one update's groups into a metrics record.  Entropy is measured
// under `params` (the post-update policy is what the caller usually passes)
// at the given temperature.
MetricsRecord record_metrics(const PolicyParameters& params, int update_index,
                             std::span<const RolloutGroup> groups, Scalar temperature,
                             Scalar loss, Scalar grad_norm);

// One-line JSON for metrics.jsonl.  Wall time is deliberately excluded so
// that reruns of the same seed produce byte-identical streams; timings go to
// a sidecar file.
std::string to_jsonl(const MetricsRecord& record);
MetricsRecord metrics_from_jsonl(const std::string& line);

// Reads a metrics.jsonl stream; DataError on unreadable or malformed files.
std::vector<MetricsRecord> read_metrics_file(const std::filesystem::path& path);

}  // namespace stephint
