#include "stephint/rollout.hpp"

#include <algorithm>

namespace stephint {

void RolloutPlan::validate() const {
  if (k_hint < 0 || k_unhint < 0) throw ConfigError("rollout plan: sample counts must be >= 0");
  if (step_count < 1) throw ConfigError("rollout plan: step count must be >= 1");
  if (planned() < 1) throw ConfigError("rollout plan: plan produces no records");
}

OptimizedRegion optimized_region(const RolloutRecord& record) {
  OptimizedRegion out;
  const auto& p = record.prefix_tokens;
  if (record.prompt_len < 0 || record.prompt_len > static_cast<int>(p.size()))
    throw ConfigError("optimized_region: prompt_len out of range");
  out.tokens.assign(p.begin() + record.prompt_len, p.end());
  out.tokens.insert(out.tokens.end(), record.completion_tokens.begin(),
                    record.completion_tokens.end());
  out.hint_mask.assign(out.tokens.size(), 0);
  switch (record.condition) {
    case RolloutCondition::hinted:
      if (record.hint_token_count > static_cast<int>(out.tokens.size()))
        throw ConfigError("optimized_region: hint length exceeds region");
      std::fill(out.hint_mask.begin(), out.hint_mask.begin() + record.hint_token_count, 1);
      break;
    case RolloutCondition::reference:
      std::fill(out.hint_mask.begin(), out.hint_mask.end(), 1);
      break;
    case RolloutCondition::unhinted:
      break;
  }
  return out;
}

RolloutGroup collect_group(const PolicyParameters& params, const TaskVocabulary& tv,
                           const DatasetRecord& record, const RolloutPlan& plan,
                           Scalar temperature, int max_len, Rng& rng) {
  plan.validate();
  if (max_len < 1) throw ConfigError("collect_group: max_len must be >= 1");
  if (plan.k_hint > 0) {
    if (record.partition.step_count != plan.step_count)
      throw ConfigError("collect_group: plan step count does not match the record's partition");
    if (static_cast<int>(record.hints.hints.size()) != plan.step_count - 1)
      throw ConfigError("collect_group: record hint count does not match plan");
  }

  RolloutGroup group;
  group.params_revision = params.revision;
  group.records.reserve(static_cast<std::size_t>(plan.planned()));
  const TokenSeq& prompt = record.problem.prompt_tokens;

  // Hinted records, level ascending.
  for (int level = 1; level < plan.step_count && plan.k_hint > 0; ++level) {
    const TokenSeq& hint = record.hints.hints[static_cast<std::size_t>(level - 1)];
    TokenSeq prefix = prompt;
    prefix.insert(prefix.end(), hint.begin(), hint.end());
    const Vector hint_lp = sequence_log_prob(params, prompt, hint, temperature);
    for (int s = 0; s < plan.k_hint; ++s) {
      RolloutRecord r;
      r.condition = RolloutCondition::hinted;
      r.hint_level = level;
      r.prefix_tokens = prefix;
      r.prompt_len = static_cast<int>(prompt.size());
      r.hint_token_count = static_cast<int>(hint.size());
      SampledSequence sampled = sample_completion(params, tv.vocab, prefix, temperature, max_len, rng);
      r.completion_tokens = std::move(sampled.tokens);
      r.behavior_log_probs = Vector(hint_lp.size() + sampled.per_token_log_prob.size());
      r.behavior_log_probs << hint_lp, sampled.per_token_log_prob;
      TokenSeq chain = hint;
      chain.insert(chain.end(), r.completion_tokens.begin(), r.completion_tokens.end());
      r.reward = verify(tv, record.problem, chain);
      group.records.push_back(std::move(r));
    }
  }

  // Unhinted records.
  for (int s = 0; s < plan.k_unhint; ++s) {
    RolloutRecord r;
    r.condition = RolloutCondition::unhinted;
    r.prefix_tokens = prompt;
    r.prompt_len = static_cast<int>(prompt.size());
    SampledSequence sampled = sample_completion(params, tv.vocab, prompt, temperature, max_len, rng);
    r.completion_tokens = std::move(sampled.tokens);
    r.behavior_log_probs = sampled.per_token_log_prob;
    r.reward = verify(tv, record.problem, r.completion_tokens);
    group.records.push_back(std::move(r));
  }

  // Reference record: the full teacher chain, reward 1 by construction.
  if (plan.include_reference) {
    RolloutRecord r;
    r.condition = RolloutCondition::reference;
    r.prefix_tokens = prompt;
    r.prompt_len = static_cast<int>(prompt.size());
    r.completion_tokens = record.teacher.chain.tokens;
    r.behavior_log_probs = sequence_log_prob(params, prompt, r.completion_tokens, temperature);
    r.hint_token_count = thought_length(tv.vocab, record.teacher.chain);
    r.reward = verify(tv, record.problem, r.completion_tokens);
    group.records.push_back(std::move(r));
  }
  return group;
}

}  // namespace stephint
