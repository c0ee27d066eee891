#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skeval/metrics.hpp"
#include "skeval/patterns.hpp"
#include "skeval/run_store.hpp"

namespace skeval {

struct TaskTally {
  std::uint64_t generated = 0;
  std::uint64_t valid = 0;
  std::uint64_t malformed = 0;
  std::uint64_t discarded = 0;
  std::uint64_t failed = 0;
  std::uint64_t classified = 0;
  std::uint64_t parse_failures = 0;
};

// Everything the report shows for one run.
struct RunEvaluation {
  std::string run_id;
  std::string model_id;
  std::map<PromptVariant, ConfusionMatrix> matrices;
  ConfusionMatrix pooled;
  MetricsReport metrics;
  PatternReport patterns;
  TaskTally tally;
};

// Joins outcomes to their tasks (after review decisions) and scores every
// pair whose task is still Valid.
RunEvaluation evaluate_run(const LoadedRun& run);

struct ReportBundle {
  std::vector<RunEvaluation> runs;
};

using TypeRow = std::array<std::optional<double>, kNumTypes>;

// Column means over rows; a column with any undefined entry is undefined.
TypeRow mean_row(const std::vector<TypeRow>& rows);

// Confidence Balance per type for one run under an aggregate.
TypeRow confidence_balance_row(const RunEvaluation& run, std::string_view variant);

// Two decimals; undefined values render as a dash, never as 0.
std::string format_value(const std::optional<double>& v);

std::string render_markdown(const ReportBundle& bundle);
// Long format: run_id,variant,scope,metric,value,numerator,denominator
std::string render_metrics_csv(const ReportBundle& bundle);
// Long format: run_id,distribution,key,count,share
std::string render_patterns_csv(const ReportBundle& bundle);
nlohmann::json render_json(const ReportBundle& bundle);

// Writes report.md, metrics.csv, patterns.csv and report.json into `dir`.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace skeval
