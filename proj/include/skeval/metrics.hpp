#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skeval/prompt_forge.hpp"
#include "skeval/records.hpp"
#include "skeval/taxonomy.hpp"

namespace skeval {

// Cells of the generation/classification confusion matrix. First letter:
// what the task was generated as (feasible / infeasible with reason r).
// Second: what the model did on attempt (answered / declared infeasible with
// the same reason / with a different reason r').
enum class ConfusionCell { FF, FR, RF, RR, RRprime };

inline constexpr std::array<ConfusionCell, 5> kAllCells = {
    ConfusionCell::FF, ConfusionCell::FR, ConfusionCell::RF, ConfusionCell::RR,
    ConfusionCell::RRprime};

std::string_view slug(ConfusionCell c);

struct CellCounts {
  std::array<std::uint64_t, 5> n{};

  std::uint64_t& operator[](ConfusionCell c) { return n[static_cast<std::size_t>(c)]; }
  std::uint64_t operator[](ConfusionCell c) const { return n[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const;
  CellCounts& operator+=(const CellCounts& o);
  friend bool operator==(const CellCounts&, const CellCounts&) = default;
};

struct CellAssignment {
  SelfKnowledgeType type;
  ConfusionCell cell;
  friend bool operator==(const CellAssignment&, const CellAssignment&) = default;
};

// Throws std::invalid_argument for a ParseFailure verdict; callers filter
// those out first.
CellAssignment assign_cell(const FeasibilityLabel& label, const Verdict& verdict);
CellAssignment assign_cell(const TaskRecord& task, const ClassificationOutcome& outcome);

// nullopt is the overall scope.
using Scope = std::optional<SelfKnowledgeType>;

std::string scope_slug(const Scope& scope);
std::string scope_name(const Scope& scope);

using ReasonPair = std::pair<InfeasibilityReason, InfeasibilityReason>;

class ConfusionMatrix {
 public:
  // Adds one scored pair. ParseFailure outcomes only bump the failure tally.
  void add(const TaskRecord& task, const ClassificationOutcome& outcome);
  void add(const FeasibilityLabel& label, const Verdict& verdict);
  // Raw cell increments, without reason bookkeeping.
  void add_counts(SelfKnowledgeType type, ConfusionCell cell, std::uint64_t count = 1);

  const CellCounts& counts(SelfKnowledgeType type) const { return counts_[index_of(type)]; }
  CellCounts counts(const Scope& scope) const;
  CellCounts overall() const;

  // (generated r, classified r') for RRprime instances; r != r' always.
  const std::map<ReasonPair, std::uint64_t>& reason_pairs() const { return reason_pairs_; }
  // Classified reason of FR instances.
  const std::array<std::uint64_t, kNumReasons>& overconfident_reasons() const {
    return overconf_reasons_;
  }
  // Generated reason of RF instances.
  const std::array<std::uint64_t, kNumReasons>& conservative_reasons() const {
    return conserv_reasons_;
  }

  std::uint64_t parse_failures(SelfKnowledgeType type) const {
    return parse_failures_[index_of(type)];
  }
  std::uint64_t parse_failures() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& o);

 private:
  std::array<CellCounts, kNumTypes> counts_{};
  std::map<ReasonPair, std::uint64_t> reason_pairs_;
  std::array<std::uint64_t, kNumReasons> overconf_reasons_{};
  std::array<std::uint64_t, kNumReasons> conserv_reasons_{};
  std::array<std::uint64_t, kNumTypes> parse_failures_{};
};

// A ratio that may be undefined (empty denominator). Undefined metrics carry
// no value, never a silent 0.
struct Metric {
  std::optional<double> value;
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;

  bool defined() const { return value.has_value(); }
  static Metric ratio(std::uint64_t num, std::uint64_t den);
  static Metric derived(std::optional<double> v) { return {v, 0, 0}; }
};

// (FF + RR) / all five cells.
Metric accuracy(const CellCounts& c);
// RR / (RF + RR + RR').
Metric foresight(const CellCounts& c);
// RR / (FR + RR + RR').
Metric insight(const CellCounts& c);
// FR / (FF + FR).
Metric overconfidence(const CellCounts& c);
// RF / (RF + RR + RR').
Metric conservatism(const CellCounts& c);
// (Over - Conserv) / max(Over, Conserv); 0 when both rates are 0; undefined
// when either side of the matrix is empty.
Metric confidence_balance(const CellCounts& c);

std::optional<double> confidence_balance_from_rates(std::optional<double> over,
                                                    std::optional<double> conserv);
// 2FI / (F + I), 0 when F + I = 0. Throws std::invalid_argument outside [0, 1].
double harmonic_mean_fi(double foresight, double insight);

inline Metric accuracy(const ConfusionMatrix& m, const Scope& s) { return accuracy(m.counts(s)); }
inline Metric foresight(const ConfusionMatrix& m, const Scope& s) { return foresight(m.counts(s)); }
inline Metric insight(const ConfusionMatrix& m, const Scope& s) { return insight(m.counts(s)); }
inline Metric confidence_balance(const ConfusionMatrix& m, const Scope& s) {
  return confidence_balance(m.counts(s));
}

struct MetricSet {
  Metric accuracy;
  Metric foresight;
  Metric insight;
  Metric overconfidence;
  Metric conservatism;
  Metric confidence_balance;
  Metric harmonic_mean;
};

MetricSet compute_metrics(const CellCounts& c);

// Names used for the variant column of reports.
inline constexpr std::string_view kCombinedMicro = "combined-micro";
inline constexpr std::string_view kCombinedMacro = "combined-macro";

struct ReportRow {
  std::string variant;
  Scope scope;
  MetricSet metrics;
  // Cell counts behind the row; empty for macro rows.
  std::optional<CellCounts> counts;
};

// Per variant and per scope, plus two cross-variant aggregates: micro pools
// the raw counts, macro averages A, F, I, Over and Conserv over variants and
// derives HM and CB from those averages.
struct MetricsReport {
  std::vector<std::string> variants;
  std::vector<ReportRow> rows;
  std::map<std::string, std::uint64_t> parse_failures;

  const ReportRow* find(std::string_view variant, const Scope& scope) const;
};

MetricsReport build_report(const std::map<PromptVariant, ConfusionMatrix>& by_variant);

struct StrongestWeakest {
  SelfKnowledgeType strongest;
  SelfKnowledgeType weakest;
  bool strongest_tied = false;
  bool weakest_tied = false;
};

// argmax / argmin of the harmonic mean over the five types; ties go to the
// earlier type and set the tie flag. Throws Error naming the first type
// whose value is undefined.
StrongestWeakest strongest_weakest(const std::array<std::optional<double>, kNumTypes>& hm);
StrongestWeakest strongest_weakest(const MetricsReport& report, std::string_view variant);

}  // namespace skeval
