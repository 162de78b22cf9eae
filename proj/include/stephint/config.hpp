#pragma once

// Training configuration: defaults, key=value parsing, CLI override hooks,
// and a canonical snapshot serialization.  One key table drives everything,
// so config files and command-line flags accept exactly the same names.

#include "stephint/chain.hpp"
#include "stephint/policy.hpp"
#include "stephint/rollout.hpp"
#include "stephint/tasks.hpp"
#include "stephint/types.hpp"

#include <filesystem>
#include <functional>

namespace stephint {

struct TrainConfig {
  std::string mode = "stephint";  // "stephint" or "vanilla"
  std::uint64_t seed = 1;

  // task
  int modulus = 13;
  int op_count = 4;
  int operand_min = 0;
  int operand_max = -1;  // -1: modulus - 1

  // dataset
  int dataset_size = 256;
  int dataset_max_len = 64;
  int step_count = 4;
  std::string min_step_mode = "fraction";  // "fraction" or "absolute"
  Scalar min_step_value = 0.125;

  // rollout plan (-1: filled in from mode)
  int k_hint = -1;
  int k_unhint = -1;
  int include_reference = -1;

  // optimization
  int batch_problems = 16;
  int updates = 300;
  Scalar temperature = 1.0;
  int rollout_max_len = 48;
  Scalar clip_eps = 0.2;
  Scalar kl_beta = 0.0;
  Scalar learning_rate = 1e-2;
  int inner_epochs = 1;

  // policy
  int embed_dim = 16;
  int window = 32;
  int hidden_dim = 128;

  // evaluation
  int eval_problems = 200;
  int eval_samples = 64;
  std::vector<int> eval_k_grid = {1, 2, 4, 8, 16, 32, 64};
  int eval_max_len = -1;        // -1: rollout_max_len
  Scalar eval_temperature = -1; // -1: temperature

  // orchestration
  int checkpoint_every = 100;
  int threads = 1;  // 0: hardware concurrency
  std::string out_dir;

  // Resolves mode-dependent and sentinel defaults, then validates every
  // field.  Must be called once after all overrides are applied.
  void finalize();

  // Typed views (valid after finalize()).
  TaskSpec task_spec() const;
  MinStepPolicy min_step_policy() const;
  DatasetParams dataset_params() const;
  RolloutPlan rollout_plan() const;
  PolicyDims policy_dims(int vocab_size) const;
  int resolved_threads() const;
};

// One settable configuration key.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// The full key table, in canonical serialization order.
const std::vector<ConfigKey>& config_keys();

// Applies "key=value"; unknown keys and unparseable values are ConfigErrors.
void apply_config_entry(TrainConfig& config, const std::string& entry);

// key=value file with '#' comments and blank lines.  Later keys win.
void apply_config_file(TrainConfig& config, const std::filesystem::path& path);

// Canonical snapshot (every key, current values, one per line).
std::string serialize_config(const TrainConfig& config);

}  // namespace stephint
