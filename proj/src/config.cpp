#include "stephint/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace stephint {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Throws std::invalid_argument on failure; apply_config_entry rewraps with
// the key name.
template <typename T>
T parse_number(const std::string&, const std::string& value) {
  T out{};
  const char* begin = value.data();
  const char* end = begin + value.size();
  std::from_chars_result r{};
  if constexpr (std::is_floating_point_v<T>)
    r = std::from_chars(begin, end, out);
  else
    r = std::from_chars(begin, end, out, 10);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument(value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config: bad boolean '" + value + "' for key '" + key + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("config: empty list for key '" + key + "'");
  return out;
}

std::string format_scalar(Scalar v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  auto add = [&](std::string name, std::string help, auto setter, auto getter) {
    keys.push_back({std::move(name), std::move(help), setter, getter});
  };
  auto int_key = [&](std::string name, std::string help, int TrainConfig::* field) {
    add(std::move(name), std::move(help),
        [field](TrainConfig& c, const std::string& v) { c.*field = parse_number<int>("", v); },
        [field](const TrainConfig& c) { return std::to_string(c.*field); });
  };
  auto scalar_key = [&](std::string name, std::string help, Scalar TrainConfig::* field) {
    add(std::move(name), std::move(help),
        [field](TrainConfig& c, const std::string& v) { c.*field = parse_number<Scalar>("", v); },
        [field](const TrainConfig& c) { return format_scalar(c.*field); });
  };

  add("mode", "training mode: stephint or vanilla",
      [](TrainConfig& c, const std::string& v) {
        if (v != "stephint" && v != "vanilla")
          throw ConfigError("config: mode must be 'stephint' or 'vanilla'");
        c.mode = v;
      },
      [](const TrainConfig& c) { return c.mode; });
  add("seed", "root random seed",
      [](TrainConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
      [](const TrainConfig& c) { return std::to_string(c.seed); });
  int_key("modulus", "task modulus P", &TrainConfig::modulus);
  int_key("op_count", "operations per problem D", &TrainConfig::op_count);
  int_key("operand_min", "minimum operand residue", &TrainConfig::operand_min);
  int_key("operand_max", "maximum operand residue (-1: modulus-1)", &TrainConfig::operand_max);
  int_key("dataset_size", "problems in the training dataset", &TrainConfig::dataset_size);
  int_key("dataset_max_len", "teacher chain length filter", &TrainConfig::dataset_max_len);
  int_key("step_count", "partition steps m", &TrainConfig::step_count);
  add("min_step_mode", "min step length mode: fraction or absolute",
      [](TrainConfig& c, const std::string& v) {
        if (v != "fraction" && v != "absolute")
          throw ConfigError("config: min_step_mode must be 'fraction' or 'absolute'");
        c.min_step_mode = v;
      },
      [](const TrainConfig& c) { return c.min_step_mode; });
  scalar_key("min_step_value", "min step length value (fraction of thought or tokens)",
             &TrainConfig::min_step_value);
  int_key("k_hint", "samples per hint level (-1: mode default)", &TrainConfig::k_hint);
  int_key("k_unhint", "unhinted samples per group (-1: mode default)", &TrainConfig::k_unhint);
  add("include_reference", "append the teacher reference record (-1: mode default)",
      [](TrainConfig& c, const std::string& v) {
        c.include_reference = (v == "-1") ? -1 : (parse_bool("include_reference", v) ? 1 : 0);
      },
      [](const TrainConfig& c) {
        return c.include_reference < 0 ? std::string("-1")
                                       : std::string(c.include_reference ? "true" : "false");
      });
  int_key("batch_problems", "problems per update", &TrainConfig::batch_problems);
  int_key("updates", "optimizer updates to run", &TrainConfig::updates);
  scalar_key("temperature", "sampling temperature for rollouts", &TrainConfig::temperature);
  int_key("rollout_max_len", "max completion tokens per rollout", &TrainConfig::rollout_max_len);
  scalar_key("clip_eps", "PPO clipping epsilon", &TrainConfig::clip_eps);
  scalar_key("kl_beta", "KL penalty coefficient (0 disables)", &TrainConfig::kl_beta);
  scalar_key("learning_rate", "Adam learning rate", &TrainConfig::learning_rate);
  int_key("inner_epochs", "optimizer passes per batch", &TrainConfig::inner_epochs);
  int_key("embed_dim", "token embedding width", &TrainConfig::embed_dim);
  int_key("window", "context window in tokens", &TrainConfig::window);
  int_key("hidden_dim", "hidden layer width", &TrainConfig::hidden_dim);
  int_key("eval_problems", "held-out problems for the final evaluation", &TrainConfig::eval_problems);
  int_key("eval_samples", "samples per problem at evaluation", &TrainConfig::eval_samples);
  add("eval_k_grid", "comma-separated k values for pass@k",
      [](TrainConfig& c, const std::string& v) { c.eval_k_grid = parse_int_list("eval_k_grid", v); },
      [](const TrainConfig& c) { return format_int_list(c.eval_k_grid); });
  int_key("eval_max_len", "max completion tokens at evaluation (-1: rollout_max_len)",
          &TrainConfig::eval_max_len);
  scalar_key("eval_temperature", "evaluation temperature (-1: temperature)",
             &TrainConfig::eval_temperature);
  int_key("checkpoint_every", "updates between checkpoints (0: final only)",
          &TrainConfig::checkpoint_every);
  int_key("threads", "worker threads (0: hardware concurrency)", &TrainConfig::threads);
  add("out_dir", "run output directory",
      [](TrainConfig& c, const std::string& v) { c.out_dir = v; },
      [](const TrainConfig& c) { return c.out_dir; });
  return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

void apply_config_entry(TrainConfig& config, const std::string& entry) {
  const auto eq = entry.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: expected key=value, got '" + entry + "'");
  const std::string key = trim(entry.substr(0, eq));
  const std::string value = trim(entry.substr(eq + 1));
  if (key.empty()) throw ConfigError("config: empty key in '" + entry + "'");
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      try {
        k.set(config, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("config: bad value '" + value + "' for key '" + key + "'");
      }
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    try {
      apply_config_entry(config, t);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const auto& k : config_keys()) {
    out += k.name;
    out += " = ";
    out += k.get(config);
    out += '\n';
  }
  return out;
}

void TrainConfig::finalize() {
  if (mode != "stephint" && mode != "vanilla")
    throw ConfigError("config: mode must be 'stephint' or 'vanilla'");
  const bool sh = (mode == "stephint");
  if (k_hint < 0) k_hint = sh ? 2 : 0;
  if (k_unhint < 0) k_unhint = sh ? 5 : 12;
  if (include_reference < 0) include_reference = sh ? 1 : 0;
  if (!sh && (k_hint > 0 || include_reference))
    throw ConfigError("config: mode=vanilla is incompatible with hints or a reference record");
  if (min_step_mode != "fraction" && min_step_mode != "absolute")
    throw ConfigError("config: min_step_mode must be 'fraction' or 'absolute'");
  if (operand_max < 0) operand_max = modulus - 1;
  if (eval_max_len < 0) eval_max_len = rollout_max_len;
  if (eval_temperature < 0) eval_temperature = temperature;

  task_spec().validate();
  min_step_policy().validate();
  rollout_plan().validate();
  if (dataset_size < 1) throw ConfigError("config: dataset_size must be >= 1");
  if (dataset_max_len < 1) throw ConfigError("config: dataset_max_len must be >= 1");
  if (step_count < 1) throw ConfigError("config: step_count must be >= 1");
  if (batch_problems < 1 || batch_problems > dataset_size)
    throw ConfigError("config: batch_problems must lie in [1, dataset_size]");
  if (updates < 0) throw ConfigError("config: updates must be >= 0");
  if (!(temperature > 0)) throw ConfigError("config: temperature must be positive");
  if (rollout_max_len < 1) throw ConfigError("config: rollout_max_len must be >= 1");
  if (clip_eps < 0) throw ConfigError("config: clip_eps must be >= 0");
  if (kl_beta < 0) throw ConfigError("config: kl_beta must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("config: learning_rate must be positive");
  if (inner_epochs < 1) throw ConfigError("config: inner_epochs must be >= 1");
  if (embed_dim < 1 || window < 1 || hidden_dim < 1)
    throw ConfigError("config: policy dimensions must be >= 1");
  if (eval_problems < 1) throw ConfigError("config: eval_problems must be >= 1");
  if (eval_samples < 1) throw ConfigError("config: eval_samples must be >= 1");
  for (std::size_t i = 0; i < eval_k_grid.size(); ++i) {
    if (eval_k_grid[i] < 1 || eval_k_grid[i] > eval_samples)
      throw ConfigError("config: eval_k_grid values must lie in [1, eval_samples]");
    if (i > 0 && eval_k_grid[i] <= eval_k_grid[i - 1])
      throw ConfigError("config: eval_k_grid must be strictly ascending");
  }
  if (eval_max_len < 1) throw ConfigError("config: eval_max_len must be >= 1");
  if (!(eval_temperature > 0)) throw ConfigError("config: eval_temperature must be positive");
  if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
}

TaskSpec TrainConfig::task_spec() const {
  TaskSpec s;
  s.modulus = modulus;
  s.op_count = op_count;
  s.operand_min = operand_min;
  s.operand_max = operand_max < 0 ? modulus - 1 : operand_max;
  return s;
}

MinStepPolicy TrainConfig::min_step_policy() const {
  MinStepPolicy p;
  p.mode = (min_step_mode == "absolute") ? MinStepPolicy::Mode::absolute
                                         : MinStepPolicy::Mode::fraction;
  p.value = min_step_value;
  return p;
}

DatasetParams TrainConfig::dataset_params() const {
  DatasetParams d;
  d.spec = task_spec();
  d.size = dataset_size;
  d.max_chain_len = dataset_max_len;
  d.step_count = step_count;
  d.min_step = min_step_policy();
  return d;
}

RolloutPlan TrainConfig::rollout_plan() const {
  RolloutPlan p;
  p.k_hint = std::max(0, k_hint);
  p.k_unhint = std::max(0, k_unhint);
  p.include_reference = include_reference > 0;
  p.step_count = step_count;
  return p;
}

PolicyDims TrainConfig::policy_dims(int vocab_size) const {
  return PolicyDims{vocab_size, embed_dim, window, hidden_dim};
}

int TrainConfig::resolved_threads() const {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace stephint
