#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skeval/pipeline.hpp"
#include "skeval/records.hpp"

namespace skeval {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.3.0";

struct TemplateFingerprint {
  std::string key;  // "<kind>.<variant>"
  std::string sha256;
  // Override file the template was read from; empty for built-in templates.
  std::string source;
  friend bool operator==(const TemplateFingerprint&, const TemplateFingerprint&) = default;
};

struct RunManifest {
  int schema_version = kSchemaVersion;
  std::string run_id;
  std::string model_id;
  std::string provider_id;
  std::vector<std::string> variants;
  // Per prompt variant.
  std::map<std::string, int> per_category;
  std::map<std::string, SamplingPlan> sampling;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<TemplateFingerprint> templates;
  // Scripted subject profile, for simulated runs.
  std::optional<nlohmann::json> profile;
  std::string created_at;
  std::string updated_at;
  std::string tool_version = std::string(kToolVersion);
  bool sealed = false;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TaskRecord& r);
TaskRecord task_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ClassificationOutcome& o);
ClassificationOutcome outcome_from_json(const nlohmann::json& j);

std::vector<TemplateFingerprint> fingerprints_of(const TemplateSet& templates);

struct LoadedRun {
  RunManifest manifest;
  std::vector<TaskRecord> tasks;
  std::vector<ClassificationOutcome> outcomes;
  std::vector<ReviewItem> flagged;
  // Latest human decision per task id.
  std::map<std::string, ReviewDecision> decisions;

  // Tasks with review decisions applied (validate_tasks over `tasks`).
  std::vector<TaskRecord> reviewed_tasks() const;
  const TaskRecord* find_task(std::string_view id) const;
};

// One directory per run:
//   manifest.json   run description, rewritten atomically
//   tasks.jsonl     one TaskRecord per line
//   outcomes.jsonl  one ClassificationOutcome per line
//   review.jsonl    flagged tasks and human decisions
//   errors.jsonl    provider failures, by request id
// The .jsonl files are append-only; each line is written with a single
// write() and rolled back if the write comes up short.
class RunStore {
 public:
  // Throws StoreError if `dir` already holds a run.
  static RunStore create(const std::filesystem::path& dir, RunManifest manifest);
  static RunStore open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  RunStore(RunStore&&) noexcept;
  RunStore& operator=(RunStore&&) noexcept;
  ~RunStore();

  const std::filesystem::path& dir() const { return dir_; }
  RunManifest manifest() const;
  bool sealed() const;

  // All appends throw StoreError on a sealed run. Safe to call concurrently.
  void append_task(const TaskRecord& record);
  void append_outcome(const ClassificationOutcome& outcome);
  void append_flag(const ReviewItem& item);
  void append_decision(const std::string& task_id, ReviewDecision decision);
  void append_error(const FailedRequest& failure, std::string_view stage);

  void update_manifest(const std::function<void(RunManifest&)>& edit);
  void seal();

  LoadedRun load() const;

 private:
  struct State;
  explicit RunStore(std::filesystem::path dir, std::unique_ptr<State> state);
  void append_line(const std::string& file, const nlohmann::json& j);

  std::filesystem::path dir_;
  std::unique_ptr<State> state_;
};

// Reads and checks a run: every line parses, every outcome joins exactly one
// task, ids are unique, and template override files still match their
// recorded fingerprints. Throws CorruptLine / IntegrityError.
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace skeval
