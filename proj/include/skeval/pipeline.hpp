#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skeval/prompt_forge.hpp"
#include "skeval/provider.hpp"
#include "skeval/records.hpp"
#include "skeval/taxonomy.hpp"
#include "skeval/util.hpp"

namespace skeval {

struct GenerationSlot {
  std::string task_id;
  FeasibilityLabel label;
};

// Balanced generation plan: the same number of feasible and infeasible tasks
// for every self-knowledge type; a type's infeasible tasks are split as
// evenly as possible over its reasons.
struct GenerationPlan {
  PromptVariant variant = PromptVariant::Vanilla;
  int per_category = 0;
  std::array<int, kNumTypes> feasible_per_type{};
  std::array<int, kNumTypes> infeasible_per_type{};
  std::array<int, kNumReasons> reason_quota{};
  std::vector<GenerationSlot> slots;

  int total_feasible() const;
  int total_infeasible() const;
};

// Reason remainders go to the earliest reasons in taxonomy order. Task ids
// are "<variant>-f-NNNNNN" / "<variant>-i-NNNNNN", numbered per side.
GenerationPlan plan_generation(int per_category, PromptVariant variant);

struct GenerationOptions {
  std::string model_id;
  int max_tokens = kGenerationMaxTokens;
  // Extra attempts for a slot whose output fails the automatic checks.
  int malformed_retries = 2;
  Clock clock = system_clock();
  // Receives records in plan order as soon as each prefix is complete.
  std::function<void(const TaskRecord&)> on_record;
};

// Request ids used against the gateway; failure injection keys on these.
std::string generation_request_id(std::string_view task_id);
std::string classification_request_id(std::string_view task_id);

// One record per slot, in plan order. Provider errors mark a slot Failed
// without stopping the run. Requests go out concurrently up to the
// gateway's in-flight cap.
std::vector<TaskRecord> run_generation(const GenerationPlan& plan, Gateway& gateway,
                                       const PromptForge& forge, const GenerationOptions& options);

// The task text inside a generation response: whatever follows the last
// "TASK:" marker, or the whole response when there is none.
std::string extract_task_text(std::string_view response);

// Why a generated task text should not be used, if anything.
std::optional<std::string> automatic_check(std::string_view text);

enum class ReviewDecision { Discard, Restore };

std::string_view slug(ReviewDecision d);
std::optional<ReviewDecision> review_decision_from_slug(std::string_view s);

// A task flagged for a human to look at.
struct ReviewItem {
  std::string task_id;
  std::string issue;
  std::string text;
  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

struct ValidationResult {
  std::vector<TaskRecord> records;
  // Malformed tasks that have no recorded human decision yet.
  std::vector<ReviewItem> queued;
};

// Applies the automatic checks, then the human decisions: Discard makes a
// task Discarded, Restore makes a Malformed task Valid again. Failed slots
// are left alone.
ValidationResult validate_tasks(std::vector<TaskRecord> records,
                                const std::map<std::string, ReviewDecision>& decisions = {});

struct SamplingPlan {
  int n_feasible = 0;
  int n_infeasible = 0;
  std::uint64_t seed = 0;
};

// Per-type quota for `n` tasks over the five types: n / 5 each, remainder to
// the earliest types.
std::array<int, kNumTypes> type_quotas(int n);

// Seeded uniform sample without replacement from the Valid records, with
// per-type quotas on each side. Output order is shuffled by the same seed.
// Throws InsufficientTasks naming the first type that cannot fill its quota.
std::vector<TaskRecord> sample_balanced(const std::vector<TaskRecord>& records,
                                        const SamplingPlan& plan);

struct ClassificationOptions {
  std::string model_id;
  int max_tokens = kClassificationMaxTokens;
  Clock clock = system_clock();
  std::function<void(const ClassificationOutcome&)> on_outcome;
};

struct FailedRequest {
  std::string task_id;
  std::string request_id;
  std::string kind;
  std::string message;
};

struct ClassificationRun {
  std::vector<ClassificationOutcome> outcomes;
  std::vector<FailedRequest> failures;
};

// Each task is classified with the prompt variant it was generated under,
// at temperature 0. Outcomes come back in task order; tasks whose request
// failed have no outcome and are listed in `failures`.
ClassificationRun run_classification(const std::vector<TaskRecord>& tasks, Gateway& gateway,
                                     const PromptForge& forge,
                                     const ClassificationOptions& options);

// Reads the trailing verdict block of a classification response:
//   VERDICT: ANSWERED
// or
//   VERDICT: INFEASIBLE
//   REASON: <slug or display name>
// Anything else is a ParseFailure carrying the whole response.
Verdict parse_verdict(std::string_view raw_response);

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace skeval
