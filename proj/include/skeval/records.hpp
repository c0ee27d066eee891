#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "skeval/prompt_forge.hpp"
#include "skeval/taxonomy.hpp"

namespace skeval {

// Valid: usable for classification. Malformed: failed the automatic checks
// (pending human review). Discarded: removed by a reviewer. Failed: the
// provider never returned text for the slot; it can be regenerated.
enum class TaskStatus { Valid, Malformed, Discarded, Failed };

std::string_view slug(TaskStatus s);
std::optional<TaskStatus> task_status_from_slug(std::string_view s);

// One generated task.
struct TaskRecord {
  std::string id;
  FeasibilityLabel label = Feasible{SelfKnowledgeType::FunctionalCeiling};
  PromptVariant variant = PromptVariant::Vanilla;
  std::string text;
  std::string raw_response;
  TaskStatus status = TaskStatus::Valid;
  std::string model_id;
  std::string created_at;
  int attempts = 0;
  // Why the task is not Valid, if it is not.
  std::string note;

  friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

struct Answered {
  std::string answer_text;
  friend bool operator==(const Answered&, const Answered&) = default;
};

struct DeclaredInfeasible {
  InfeasibilityReason reason;
  friend bool operator==(const DeclaredInfeasible&, const DeclaredInfeasible&) = default;
};

struct ParseFailure {
  std::string raw_text;
  friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

using Verdict = std::variant<Answered, DeclaredInfeasible, ParseFailure>;

// The subject model's reaction to one task.
struct ClassificationOutcome {
  std::string task_id;
  Verdict verdict = ParseFailure{};
  std::string raw_response;
  std::string model_id;
  std::string created_at;

  friend bool operator==(const ClassificationOutcome&, const ClassificationOutcome&) = default;
};

}  // namespace skeval
