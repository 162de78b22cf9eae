#include "stephint/tasks.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <string>

namespace stephint {

namespace {

using nlohmann::json;

// End-of-reasoning mass by position class along the canonical chain.
constexpr Scalar kEorAtThoughtEnd = 0.98;
constexpr Scalar kEorAtEquationEnd = 0.35;
constexpr Scalar kEorElsewhere = 0.05;
// Of the non-end-of-reasoning mass, this share goes to the canonical token.
constexpr Scalar kCanonicalShare = 0.97;

int mod_apply(const TaskVocabulary& tv, int acc, TokenId op, int operand) {
  const int P = tv.modulus;
  if (op == tv.plus_id) return (acc + operand) % P;
  if (op == tv.minus_id) return ((acc - operand) % P + P) % P;
  if (op == tv.times_id) return static_cast<int>((static_cast<long long>(acc) * operand) % P);
  throw DataError("task: unknown operator token");
}

}  // namespace

TokenId TaskVocabulary::residue(int r) const {
  if (r < 0 || r >= modulus) throw ConfigError("task vocabulary: residue out of range");
  return static_cast<TokenId>(r);
}

int TaskVocabulary::residue_value(TokenId t) const {
  return (t >= 0 && t < modulus) ? static_cast<int>(t) : -1;
}

TaskVocabulary make_task_vocabulary(int modulus) {
  if (modulus < 2) throw ConfigError("task vocabulary: modulus must be >= 2");
  TaskVocabulary tv;
  tv.modulus = modulus;
  std::vector<std::string> symbols;
  symbols.reserve(static_cast<std::size_t>(modulus) + 8);
  for (int r = 0; r < modulus; ++r) symbols.push_back(std::to_string(r));
  const TokenId b = static_cast<TokenId>(modulus);
  tv.plus_id = b + 0;
  tv.minus_id = b + 1;
  tv.times_id = b + 2;
  tv.semicolon_id = b + 3;
  tv.equals_id = b + 4;
  symbols.insert(symbols.end(), {"+", "-", "*", ";", "=", "</think>", "=>", "<eos>"});
  tv.vocab = make_vocabulary(std::move(symbols), b + 5, b + 7, b + 6);
  return tv;
}

void TaskSpec::validate() const {
  if (family != TaskFamily::chain_arithmetic) throw ConfigError("task spec: unknown family");
  if (modulus < 2) throw ConfigError("task spec: modulus must be >= 2");
  if (op_count < 1) throw ConfigError("task spec: op_count must be >= 1");
  if (operand_min < 0 || operand_max < operand_min || operand_max >= modulus)
    throw ConfigError("task spec: operand range must satisfy 0 <= min <= max < modulus");
}

ParsedPrompt parse_prompt(const TaskVocabulary& tv, std::span<const TokenId> prompt) {
  const auto fail = [] { throw DataError("task: malformed prompt"); };
  std::size_t i = 0;
  const auto next = [&]() -> TokenId {
    if (i >= prompt.size()) throw DataError("task: malformed prompt");
    return prompt[i++];
  };
  ParsedPrompt out;
  const TokenId start = next();
  if (tv.residue_value(start) < 0) fail();
  out.start = tv.residue_value(start);
  if (next() != tv.semicolon_id) fail();
  while (i < prompt.size()) {
    const TokenId op = next();
    if (op != tv.plus_id && op != tv.minus_id && op != tv.times_id) fail();
    const TokenId a = next();
    if (tv.residue_value(a) < 0) fail();
    if (next() != tv.semicolon_id) fail();
    out.ops.push_back(op);
    out.operands.push_back(tv.residue_value(a));
  }
  if (out.ops.empty()) fail();
  return out;
}

int evaluate_prompt(const TaskVocabulary& tv, const ParsedPrompt& parsed) {
  int acc = parsed.start % tv.modulus;
  for (std::size_t k = 0; k < parsed.ops.size(); ++k)
    acc = mod_apply(tv, acc, parsed.ops[k], parsed.operands[k]);
  return acc;
}

Problem generate_problem(const TaskVocabulary& tv, const TaskSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.modulus != tv.modulus) throw ConfigError("generate_problem: modulus mismatch");
  Problem p;
  const int start = static_cast<int>(rng.uniform_below(static_cast<std::size_t>(tv.modulus)));
  p.prompt_tokens.push_back(tv.residue(start));
  p.prompt_tokens.push_back(tv.semicolon_id);
  const TokenId ops[3] = {tv.plus_id, tv.minus_id, tv.times_id};
  const int span = spec.operand_max - spec.operand_min + 1;
  for (int k = 0; k < spec.op_count; ++k) {
    p.prompt_tokens.push_back(ops[rng.uniform_below(3)]);
    p.prompt_tokens.push_back(
        tv.residue(spec.operand_min + static_cast<int>(rng.uniform_below(static_cast<std::size_t>(span)))));
    p.prompt_tokens.push_back(tv.semicolon_id);
  }
  p.ground_truth = evaluate_prompt(tv, parse_prompt(tv, p.prompt_tokens));
  return p;
}

TeacherChain teacher_solve(const TaskVocabulary& tv, const Problem& problem) {
  const ParsedPrompt parsed = parse_prompt(tv, problem.prompt_tokens);
  TokenSeq t;
  int acc = parsed.start;
  for (std::size_t k = 0; k < parsed.ops.size(); ++k) {
    if (k) t.push_back(tv.semicolon_id);
    const int next = mod_apply(tv, acc, parsed.ops[k], parsed.operands[k]);
    t.push_back(tv.residue(acc));
    t.push_back(parsed.ops[k]);
    t.push_back(tv.residue(parsed.operands[k]));
    t.push_back(tv.equals_id);
    t.push_back(tv.residue(next));
    acc = next;
  }
  if (acc != problem.ground_truth)
    throw DataError("teacher_solve: ground truth does not match prompt evaluation");
  t.push_back(tv.vocab.end_of_reasoning_id);
  t.push_back(tv.vocab.answer_marker_id);
  t.push_back(tv.residue(acc));
  t.push_back(tv.vocab.end_of_sequence_id);
  TeacherChain out;
  out.chain = make_chain(tv.vocab, std::move(t));
  out.verified = verify(tv, problem, out.chain.tokens) == 1;
  return out;
}

int verify(const TaskVocabulary& tv, const Problem& problem, std::span<const TokenId> completion) {
  for (TokenId t : completion)
    if (!tv.vocab.contains(t)) return 0;
  std::size_t i = 0;
  while (i < completion.size() && completion[i] != tv.vocab.end_of_reasoning_id) ++i;
  if (i + 4 != completion.size()) return 0;
  return completion[i + 1] == tv.vocab.answer_marker_id &&
                 tv.residue_value(completion[i + 2]) == problem.ground_truth &&
                 completion[i + 3] == tv.vocab.end_of_sequence_id
             ? 1
             : 0;
}

TeacherScorer::TeacherScorer(const TaskVocabulary& tv, const Problem& problem)
    : tv_(tv), canonical_(teacher_solve(tv, problem).chain.tokens) {}

int TeacherScorer::vocab_size() const { return tv_.vocab.size(); }

Vector TeacherScorer::next_probs(std::span<const TokenId> prefix) const {
  const int V = tv_.vocab.size();
  const std::size_t i = prefix.size();
  const bool on_canonical =
      i < canonical_.size() && std::equal(prefix.begin(), prefix.end(), canonical_.begin());
  if (!on_canonical) return Vector::Constant(V, 1.0 / V);

  const TokenId c = canonical_[i];
  const TokenId eor = tv_.vocab.end_of_reasoning_id;
  Vector p(V);
  if (c == eor) {
    p.setConstant((1.0 - kEorAtThoughtEnd) / (V - 1));
    p[eor] = kEorAtThoughtEnd;
    return p;
  }
  const Scalar p_eor = (c == tv_.semicolon_id) ? kEorAtEquationEnd : kEorElsewhere;
  p.setConstant((1.0 - p_eor) * (1.0 - kCanonicalShare) / (V - 2));
  p[eor] = p_eor;
  p[c] = (1.0 - p_eor) * kCanonicalShare;
  return p;
}

SampledSequence TeacherPolicy::sample(std::span<const TokenId> prefix, Scalar /*temperature*/,
                                      int max_len, Rng& /*rng*/) const {
  if (max_len < 0) throw ConfigError("teacher sample: max_len must be >= 0");
  // Split the prefix into prompt and already-produced chain tokens.
  std::size_t prompt_len = 0;
  {
    std::size_t i = 0;
    if (i < prefix.size() && tv_.residue_value(prefix[i]) >= 0 && i + 1 < prefix.size() &&
        prefix[i + 1] == tv_.semicolon_id) {
      i = 2;
      while (i + 2 < prefix.size() &&
             (prefix[i] == tv_.plus_id || prefix[i] == tv_.minus_id || prefix[i] == tv_.times_id) &&
             tv_.residue_value(prefix[i + 1]) >= 0 && prefix[i + 2] == tv_.semicolon_id)
        i += 3;
    }
    prompt_len = i;
  }
  Problem prob;
  prob.prompt_tokens.assign(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(prompt_len));
  prob.ground_truth = evaluate_prompt(tv_, parse_prompt(tv_, prob.prompt_tokens));
  const TokenSeq canonical = teacher_solve(tv_, prob).chain.tokens;

  const std::size_t done = prefix.size() - prompt_len;
  SampledSequence out;
  if (done > canonical.size() ||
      !std::equal(prefix.begin() + static_cast<std::ptrdiff_t>(prompt_len), prefix.end(),
                  canonical.begin()))
    throw DataError("teacher sample: prefix leaves the canonical chain");
  const std::size_t take = std::min(canonical.size() - done, static_cast<std::size_t>(max_len));
  out.tokens.assign(canonical.begin() + static_cast<std::ptrdiff_t>(done),
                    canonical.begin() + static_cast<std::ptrdiff_t>(done + take));
  out.per_token_log_prob = Vector::Zero(static_cast<Eigen::Index>(take));
  out.terminated = !out.tokens.empty() && out.tokens.back() == tv_.vocab.end_of_sequence_id;
  return out;
}

std::vector<DatasetRecord> build_dataset(const TaskVocabulary& tv, const DatasetParams& params,
                                         std::uint64_t seed) {
  params.spec.validate();
  params.min_step.validate();
  if (params.size < 1) throw ConfigError("build_dataset: size must be >= 1");
  if (params.step_count < 1) throw ConfigError("build_dataset: step count must be >= 1");
  if (params.max_chain_len < 1) throw ConfigError("build_dataset: max chain length must be >= 1");

  std::vector<DatasetRecord> out;
  out.reserve(static_cast<std::size_t>(params.size));
  const std::uint64_t max_attempts =
      std::max<std::uint64_t>(64, 32ull * static_cast<std::uint64_t>(params.size));
  for (std::uint64_t attempt = 0; attempt < max_attempts && out.size() < static_cast<std::size_t>(params.size);
       ++attempt) {
    Rng prng(derive_seed(seed, "dataset.problem", attempt));
    DatasetRecord rec;
    rec.problem = generate_problem(tv, params.spec, prng);
    rec.teacher = teacher_solve(tv, rec.problem);
    if (!rec.teacher.verified || rec.teacher.chain.length() > params.max_chain_len) continue;

    const TeacherScorer scorer(tv, rec.problem);
    const BoundaryTrace trace = score_boundary_trace(tv.vocab, rec.teacher.chain, scorer);
    const int l = params.min_step.resolve(trace.length());
    Rng srng(derive_seed(seed, "dataset.partition", attempt));
    rec.partition = sample_partition(trace, params.step_count, l, srng);
    rec.hints = build_hints(rec.teacher.chain, rec.partition);
    out.push_back(std::move(rec));
  }
  if (out.size() < static_cast<std::size_t>(params.size))
    throw DataError("build_dataset: could not reach requested size (filter too strict)");
  return out;
}

void write_dataset(const TaskVocabulary& tv, std::span<const DatasetRecord> records,
                   std::uint64_t seed, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("write_dataset: cannot open '" + path.string() + "' for writing");
  for (const auto& rec : records) {
    json hints = json::array();
    for (const auto& h : rec.hints.hints)
      hints.push_back({0, static_cast<int>(h.size())});
    const json line = {{"prompt_tokens", rec.problem.prompt_tokens},
                       {"teacher_tokens", rec.teacher.chain.tokens},
                       {"boundaries", rec.partition.boundaries},
                       {"hints", hints},
                       {"ground_truth", rec.problem.ground_truth},
                       {"meta",
                        {{"modulus", tv.modulus},
                         {"op_count", static_cast<int>((rec.problem.prompt_tokens.size() - 2) / 3)},
                         {"seed", seed}}}};
    f << line.dump() << '\n';
  }
  if (!f) throw DataError("write_dataset: write failed for '" + path.string() + "'");
}

std::vector<DatasetRecord> read_dataset(const TaskVocabulary& tv,
                                        const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("read_dataset: cannot open '" + path.string() + "'");
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("read_dataset: bad JSON at line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      DatasetRecord rec;
      rec.problem.prompt_tokens = j.at("prompt_tokens").get<TokenSeq>();
      rec.problem.ground_truth = j.at("ground_truth").get<int>();
      rec.teacher.chain = make_chain(tv.vocab, j.at("teacher_tokens").get<TokenSeq>());
      rec.teacher.verified = verify(tv, rec.problem, rec.teacher.chain.tokens) == 1;
      rec.partition.boundaries = j.at("boundaries").get<std::vector<int>>();
      rec.partition.step_count = static_cast<int>(rec.partition.boundaries.size());
      rec.partition.min_len = 0;  // not serialized; informational only
      rec.hints = build_hints(rec.teacher.chain, rec.partition);
      // Cross-check the serialized hint ranges against the boundaries.
      const json& hints = j.at("hints");
      if (hints.size() != rec.hints.hints.size())
        throw DataError("hint count does not match boundaries");
      for (std::size_t h = 0; h < hints.size(); ++h)
        if (hints[h].at(0).get<int>() != 0 ||
            hints[h].at(1).get<int>() != static_cast<int>(rec.hints.hints[h].size()))
          throw DataError("hint range does not match boundaries");
      if (j.at("meta").at("modulus").get<int>() != tv.modulus)
        throw DataError("record modulus does not match task vocabulary");
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError("read_dataset: missing or mistyped field at line " + std::to_string(lineno) +
                      ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("read_dataset: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("read_dataset: no records in '" + path.string() + "'");
  return out;
}

}  // namespace stephint
