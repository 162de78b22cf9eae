#pragma once

// Group-relative advantage estimation and the prefix-clipped policy update.
//
// Advantages standardize each group's rewards by its own mean and population
// standard deviation; a zero-variance group carries no signal and is skipped
// entirely.  For incorrect hinted completions, the forced hint tokens get
// their (negative) advantage clipped to zero so that a bad continuation does
// not punish the teacher-written prefix.

#include "stephint/policy.hpp"
#include "stephint/rollout.hpp"
#include "stephint/types.hpp"

namespace stephint {

// (R_i - mean) / sqrt(population variance); all zeros when the variance is
// zero.  Throws ConfigError on an empty group.
std::vector<Scalar> group_advantages(std::span<const int> rewards);

// Per-token weights for one record's optimized region: the advantage
// everywhere, except hint-masked tokens of a reward-0 record, which get
// max(0, advantage).
Vector apply_prefix_clip(Scalar advantage, const std::vector<char>& hint_mask, int reward);

// Adam with bias correction; state is lazily sized on first step.
struct AdamState {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  std::int64_t t = 0;
  Vector m, v;

  void step(Vector& theta, const Vector& grad);
};

struct TrainOptions {
  Scalar clip_eps = 0.2;
  Scalar kl_beta = 0.0;
  int inner_epochs = 1;
  const PolicyParameters* ref_params = nullptr;  // required iff kl_beta > 0

  void validate() const;
};

struct UpdateResult {
  Scalar loss = 0;
  Scalar grad_norm = 0;
  int active_records = 0;   // records that entered the objective
  int skipped_groups = 0;   // zero-variance groups
  bool stepped = false;     // false when no record carried signal
};

// One policy update over a batch of rollout groups: advantages per group
// (written back into the records), prefix clipping, clipped-surrogate
// gradient, Adam step (inner_epochs times).  Groups whose params_revision
// does not match the policy are rejected with ConfigError.  When every group
// is degenerate the update is a no-op and the revision is unchanged.
UpdateResult train_update(PolicyParameters& params, std::span<RolloutGroup> groups,
                          const TrainOptions& options, AdamState& adam);

}  // namespace stephint
