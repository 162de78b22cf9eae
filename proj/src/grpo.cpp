#include "stephint/grpo.hpp"

#include <cmath>

namespace stephint {

std::vector<Scalar> group_advantages(std::span<const int> rewards) {
  if (rewards.empty()) throw ConfigError("group_advantages: empty group");
  const Scalar n = static_cast<Scalar>(rewards.size());
  Scalar mean = 0;
  for (int r : rewards) mean += static_cast<Scalar>(r);
  mean /= n;
  Scalar var = 0;
  for (int r : rewards) {
    const Scalar d = static_cast<Scalar>(r) - mean;
    var += d * d;
  }
  var /= n;  // population variance
  std::vector<Scalar> adv(rewards.size(), 0.0);
  if (var <= 0) return adv;
  const Scalar sd = std::sqrt(var);
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = (static_cast<Scalar>(rewards[i]) - mean) / sd;
  return adv;
}

Vector apply_prefix_clip(Scalar advantage, const std::vector<char>& hint_mask, int reward) {
  Vector w = Vector::Constant(static_cast<Eigen::Index>(hint_mask.size()), advantage);
  if (reward == 0) {
    const Scalar clipped = std::max(0.0, advantage);
    for (std::size_t i = 0; i < hint_mask.size(); ++i)
      if (hint_mask[i]) w[static_cast<Eigen::Index>(i)] = clipped;
  }
  return w;
}

void AdamState::step(Vector& theta, const Vector& grad) {
  if (grad.size() != theta.size()) throw ConfigError("adam: gradient size mismatch");
  if (m.size() == 0) {
    m = Vector::Zero(theta.size());
    v = Vector::Zero(theta.size());
  } else if (m.size() != theta.size()) {
    throw ConfigError("adam: state size does not match parameters");
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.array().square().matrix();
  const Scalar bc1 = 1.0 - std::pow(beta1, static_cast<Scalar>(t));
  const Scalar bc2 = 1.0 - std::pow(beta2, static_cast<Scalar>(t));
  theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void TrainOptions::validate() const {
  if (clip_eps < 0) throw ConfigError("train options: clip_eps must be >= 0");
  if (kl_beta < 0) throw ConfigError("train options: kl_beta must be >= 0");
  if (kl_beta > 0 && !ref_params)
    throw ConfigError("train options: kl_beta > 0 requires reference parameters");
  if (inner_epochs < 1) throw ConfigError("train options: inner_epochs must be >= 1");
}

UpdateResult train_update(PolicyParameters& params, std::span<RolloutGroup> groups,
                          const TrainOptions& options, AdamState& adam) {
  options.validate();
  UpdateResult res;

  std::vector<WeightedSample> samples;
  for (auto& group : groups) {
    if (group.params_revision != params.revision)
      throw ConfigError("train_update: rollout group is stale (collected under another revision)");
    if (group.records.empty()) throw ConfigError("train_update: empty rollout group");

    std::vector<int> rewards;
    rewards.reserve(group.records.size());
    for (const auto& r : group.records) rewards.push_back(r.reward);
    const std::vector<Scalar> adv = group_advantages(rewards);
    bool degenerate = true;
    for (std::size_t i = 0; i < group.records.size(); ++i) {
      group.records[i].advantage = adv[i];
      if (adv[i] != 0.0) degenerate = false;
    }
    if (degenerate) {
      ++res.skipped_groups;
      continue;
    }
    for (const auto& r : group.records) {
      OptimizedRegion region = optimized_region(r);
      WeightedSample s;
      s.prefix.assign(r.prefix_tokens.begin(), r.prefix_tokens.begin() + r.prompt_len);
      s.continuation = std::move(region.tokens);
      s.weights = apply_prefix_clip(r.advantage, region.hint_mask, r.reward);
      s.old_log_probs = r.behavior_log_probs;
      samples.push_back(std::move(s));
      ++res.active_records;
    }
  }

  if (samples.empty()) return res;

  for (int epoch = 0; epoch < options.inner_epochs; ++epoch) {
    ObjectiveResult obj =
        objective_gradient(params, samples, options.clip_eps, options.kl_beta, options.ref_params);
    if (epoch == 0) {
      res.loss = obj.loss;
      res.grad_norm = obj.grad.norm();
    }
    adam.step(params.theta, obj.grad);
    ++params.revision;
  }
  res.stepped = true;
  return res;
}

}  // namespace stephint
