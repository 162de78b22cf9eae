#pragma once

// Multi-level hint-conditioned rollout collection.
//
// For each problem, one group holds: k_hint sampled completions per hint
// level (levels ascending, each prompt + a longer teacher prefix), k_unhint
// completions from the bare prompt, and optionally one reference record that
// replays the full teacher chain (reward 1 by construction).  Groups remember
// the parameter revision they were collected under so stale experience is
// rejected at update time.

#include "stephint/policy.hpp"
#include "stephint/tasks.hpp"
#include "stephint/types.hpp"

namespace stephint {

enum class RolloutCondition { hinted, unhinted, reference };

struct RolloutPlan {
  int k_hint = 2;
  int k_unhint = 5;
  bool include_reference = true;
  int step_count = 4;  // m; hint levels run 1..m-1

  void validate() const;
  int planned() const { return k_hint * (step_count - 1) + k_unhint + (include_reference ? 1 : 0); }
};

struct RolloutRecord {
  RolloutCondition condition = RolloutCondition::unhinted;
  int hint_level = 0;           // 1..m-1 for hinted records, else 0
  TokenSeq prefix_tokens;       // prompt (plus hint for hinted records)
  TokenSeq completion_tokens;   // sampled tokens (teacher chain for reference)
  Vector behavior_log_probs;    // one per optimized-region token, at collection time
  int prompt_len = 0;           // prompt portion of prefix_tokens
  int hint_token_count = 0;     // hint length (reference: teacher thought length)
  int reward = 0;
  Scalar advantage = 0;
};

struct RolloutGroup {
  std::vector<RolloutRecord> records;
  std::uint64_t params_revision = 0;
};

// The token span a record contributes to optimization, with a mask marking
// teacher-forced positions: the hint prefix for hinted records, everything
// for the reference record, nothing for unhinted records.
struct OptimizedRegion {
  TokenSeq tokens;             // hint tokens (if any) followed by the completion
  std::vector<char> hint_mask; // 1 where the token was forced rather than sampled
};

OptimizedRegion optimized_region(const RolloutRecord& record);

// Samples one full group for a dataset record.  Record order: hint level 1
// (k_hint samples), ..., level m-1, then unhinted, then reference.  Rewards
// verify the hint-plus-completion chain for hinted records.  Deterministic
// given the rng state.
RolloutGroup collect_group(const PolicyParameters& params, const TaskVocabulary& tv,
                           const DatasetRecord& record, const RolloutPlan& plan,
                           Scalar temperature, int max_len, Rng& rng);

}  // namespace stephint
