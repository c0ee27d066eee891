#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace skeval {

// The five kinds of self-knowledge a task can probe. Declaration order is the
// reporting order and the tie-break order everywhere in the tool.
enum class SelfKnowledgeType {
  FunctionalCeiling,
  ContextualAwareness,
  IdentificationOfAmbiguity,
  EthicalIntegrity,
  TemporalPerception,
};

// Why a task cannot be completed. Each reason belongs to exactly one
// SelfKnowledgeType (see type_of).
enum class InfeasibilityReason {
  InsufficientDomainExpertise,
  ComputationalComplexityExceeded,
  IllogicalIllFormed,
  MissingContext,
  IncoherentContext,
  VagueOpenEnded,
  NoScientificConsensus,
  MaliciousIntent,
  OffensiveTopics,
  AbstractTemporalSetting,
  OutsideTrainingCutoff,
};

inline constexpr std::size_t kNumTypes = 5;
inline constexpr std::size_t kNumReasons = 11;

inline constexpr std::array<SelfKnowledgeType, kNumTypes> kAllTypes = {
    SelfKnowledgeType::FunctionalCeiling,
    SelfKnowledgeType::ContextualAwareness,
    SelfKnowledgeType::IdentificationOfAmbiguity,
    SelfKnowledgeType::EthicalIntegrity,
    SelfKnowledgeType::TemporalPerception,
};

inline constexpr std::array<InfeasibilityReason, kNumReasons> kAllReasons = {
    InfeasibilityReason::InsufficientDomainExpertise,
    InfeasibilityReason::ComputationalComplexityExceeded,
    InfeasibilityReason::IllogicalIllFormed,
    InfeasibilityReason::MissingContext,
    InfeasibilityReason::IncoherentContext,
    InfeasibilityReason::VagueOpenEnded,
    InfeasibilityReason::NoScientificConsensus,
    InfeasibilityReason::MaliciousIntent,
    InfeasibilityReason::OffensiveTopics,
    InfeasibilityReason::AbstractTemporalSetting,
    InfeasibilityReason::OutsideTrainingCutoff,
};

constexpr std::size_t index_of(SelfKnowledgeType t) { return static_cast<std::size_t>(t); }
constexpr std::size_t index_of(InfeasibilityReason r) { return static_cast<std::size_t>(r); }

// Owning self-knowledge type of a reason. Total over the closed enumeration.
SelfKnowledgeType type_of(InfeasibilityReason reason);

// Inverse image of type_of, in declaration order.
std::vector<InfeasibilityReason> reasons_of(SelfKnowledgeType type);

// Stable machine keys, e.g. "missing_context", "temporal_perception".
std::string_view slug(SelfKnowledgeType type);
std::string_view slug(InfeasibilityReason reason);

// Human-readable names, e.g. "Missing Context", "Illogical/Ill-formed".
std::string_view display_name(SelfKnowledgeType type);
std::string_view display_name(InfeasibilityReason reason);

// Prompt fragments. For a type: what a *feasible* task testing it looks like.
// For a reason: what makes a task infeasible for that reason.
std::string_view description(SelfKnowledgeType type);
std::string_view description(InfeasibilityReason reason);

std::optional<SelfKnowledgeType> type_from_slug(std::string_view s);
std::optional<InfeasibilityReason> reason_from_slug(std::string_view s);

// Case/punctuation-insensitive lookup against slugs, display names and a few
// common spellings ("Illogical or Ill-formed", "Vague or Open-Ended").
std::optional<InfeasibilityReason> reason_from_loose_name(std::string_view s);

struct Feasible {
  SelfKnowledgeType type;
  friend bool operator==(const Feasible&, const Feasible&) = default;
};

struct Infeasible {
  InfeasibilityReason reason;
  friend bool operator==(const Infeasible&, const Infeasible&) = default;
};

// What a generated task was designed to be.
using FeasibilityLabel = std::variant<Feasible, Infeasible>;

inline bool is_feasible(const FeasibilityLabel& label) {
  return std::holds_alternative<Feasible>(label);
}

// Type a label is attributed to: the target type for feasible tasks, the
// owning type of the reason for infeasible ones.
SelfKnowledgeType target_type(const FeasibilityLabel& label);

// "feasible:<type>" or "infeasible:<reason>".
std::string to_string(const FeasibilityLabel& label);
std::optional<FeasibilityLabel> label_from_string(std::string_view s);

}  // namespace skeval
