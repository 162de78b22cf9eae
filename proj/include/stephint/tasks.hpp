#pragma once

// Synthetic verifiable task family: chained modular arithmetic.
//
// A problem is a prompt "s ; op1 a1 ; op2 a2 ; ... ; opD aD ;" over residues
// mod P.  The canonical solution walks the chain left to right, one equation
// per step ("acc op a = r ;"), closes the thought, and emits the final
// residue as the answer.  Rewards are binary and checkable by exact
// re-evaluation, so the family is verifiable end to end.

#include "stephint/chain.hpp"
#include "stephint/policy.hpp"
#include "stephint/types.hpp"
#include "stephint/vocab.hpp"

#include <filesystem>

namespace stephint {

// Vocabulary for a given modulus: residue tokens 0..P-1 followed by the
// operators and control tokens.
struct TaskVocabulary {
  Vocabulary vocab;
  int modulus = 0;

  TokenId residue(int r) const;
  int residue_value(TokenId t) const;  // -1 if not a residue token
  TokenId plus_id = -1, minus_id = -1, times_id = -1;
  TokenId semicolon_id = -1, equals_id = -1;
};

TaskVocabulary make_task_vocabulary(int modulus);

enum class TaskFamily { chain_arithmetic };

struct TaskSpec {
  TaskFamily family = TaskFamily::chain_arithmetic;
  int modulus = 13;
  int op_count = 4;       // D: number of chained operations
  int operand_min = 0;    // inclusive operand range
  int operand_max = 12;

  void validate() const;
};

struct Problem {
  TokenSeq prompt_tokens;
  int ground_truth = 0;  // final residue
};

// The parsed view of a prompt.
struct ParsedPrompt {
  int start = 0;
  std::vector<TokenId> ops;
  std::vector<int> operands;
};

// Strict prompt parser; throws DataError on malformed prompts.
ParsedPrompt parse_prompt(const TaskVocabulary& tv, std::span<const TokenId> prompt);

// Left-to-right evaluation of a parsed prompt mod P ('-' wraps non-negative).
int evaluate_prompt(const TaskVocabulary& tv, const ParsedPrompt& parsed);

// Uniform random problem drawn from the task spec's operand range.
Problem generate_problem(const TaskVocabulary& tv, const TaskSpec& spec, Rng& rng);

struct TeacherChain {
  ReasoningChain chain;  // thought, end-of-reasoning, answer marker, answer, end-of-sequence
  bool verified = false;
};

// Canonical step-by-step solution for a problem.  Throws DataError if the
// prompt is malformed or its ground truth is inconsistent.
TeacherChain teacher_solve(const TaskVocabulary& tv, const Problem& problem);

// Binary reward: 1 iff the sequence ends, immediately after its first
// end-of-reasoning token, with [answer marker, ground-truth residue,
// end-of-sequence] and nothing after.  Total on all inputs; malformed
// sequences score 0.
int verify(const TaskVocabulary& tv, const Problem& problem, std::span<const TokenId> completion);

// Next-token scorer following the canonical solution with calibrated
// end-of-reasoning mass: highest right before the thought closes, elevated at
// sub-equation ends, low elsewhere.  Off-canonical prefixes score uniform.
class TeacherScorer : public TokenScorer {
 public:
  TeacherScorer(const TaskVocabulary& tv, const Problem& problem);
  int vocab_size() const override;
  Vector next_probs(std::span<const TokenId> prefix) const override;

 private:
  const TaskVocabulary& tv_;
  TokenSeq canonical_;
};

// Deterministic perfect policy: replays the canonical chain for whatever
// prompt (plus optional chain prefix) it is handed.  Useful as an evaluation
// upper bound.
class TeacherPolicy : public CompletionSampler {
 public:
  explicit TeacherPolicy(const TaskVocabulary& tv) : tv_(tv) {}
  SampledSequence sample(std::span<const TokenId> prefix, Scalar temperature, int max_len,
                         Rng& rng) const override;

 private:
  const TaskVocabulary& tv_;
};

// ---- dataset ---------------------------------------------------------------

struct DatasetRecord {
  Problem problem;
  TeacherChain teacher;
  StepPartition partition;
  HintSet hints;
};

struct DatasetParams {
  TaskSpec spec;
  int size = 2000;
  int max_chain_len = 64;  // records with longer teacher chains are filtered out
  int step_count = 4;      // m
  MinStepPolicy min_step;  // resolves l per chain
};

// Generates, filters, partitions, and hints `size` records deterministically
// from the seed.  Throws DataError if filtering cannot reach the requested
// size within a bounded number of attempts.
std::vector<DatasetRecord> build_dataset(const TaskVocabulary& tv, const DatasetParams& params,
                                         std::uint64_t seed);

// JSONL round trip.  Each line: prompt_tokens, teacher_tokens, boundaries,
// hints (as [begin, end) index ranges into the teacher tokens), ground_truth,
// meta {modulus, op_count, seed}.
void write_dataset(const TaskVocabulary& tv, std::span<const DatasetRecord> records,
                   std::uint64_t seed, const std::filesystem::path& path);
std::vector<DatasetRecord> read_dataset(const TaskVocabulary& tv,
                                        const std::filesystem::path& path);

}  // namespace stephint
