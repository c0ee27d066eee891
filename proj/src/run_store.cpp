#include "skeval/run_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>

#include "skeval/errors.hpp"
#include "skeval/util.hpp"

namespace skeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTasks = "tasks.jsonl";
constexpr const char* kOutcomes = "outcomes.jsonl";
constexpr const char* kReview = "review.jsonl";
constexpr const char* kErrors = "errors.jsonl";

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

void write_manifest_file(const fs::path& dir, const RunManifest& m) {
  const auto tmp = dir / (std::string(kManifest) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out << to_json(m).dump(2) << '\n';
    if (!out) throw StoreError("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / kManifest);
}

RunManifest read_manifest_file(const fs::path& dir) {
  const auto path = dir / kManifest;
  if (!fs::exists(path)) throw StoreError("no run at " + dir.string() + " (missing manifest.json)");
  try {
    return manifest_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw StoreError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw StoreError(path.string() + ": " + e.what());
  }
}

// Calls fn(json, line_number) for each line. A final line without its
// newline is a torn write and reported as corrupt.
void for_each_line(const fs::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  const std::string data = read_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < data.size()) {
    ++line_no;
    const auto end = data.find('\n', start);
    if (end == std::string::npos) {
      throw CorruptLine(path.filename().string(), line_no, "truncated line (no newline)");
    }
    const std::string_view line(data.data() + start, end - start);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw CorruptLine(path.filename().string(), line_no, e.what());
    }
    try {
      fn(j, line_no);
    } catch (const json::exception& e) {
      throw CorruptLine(path.filename().string(), line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw CorruptLine(path.filename().string(), line_no, e.what());
    }
    start = end + 1;
  }
}

}  // namespace

// --- serialization ---------------------------------------------------------

json to_json(const RunManifest& m) {
  json sampling = json::object();
  for (const auto& [v, p] : m.sampling) {
    sampling[v] = {{"n_feasible", p.n_feasible}, {"n_infeasible", p.n_infeasible}, {"seed", p.seed}};
  }
  json templates = json::array();
  for (const auto& t : m.templates) {
    templates.push_back({{"key", t.key}, {"sha256", t.sha256}, {"source", t.source}});
  }
  json j = {
      {"schema_version", m.schema_version},
      {"run_id", m.run_id},
      {"model_id", m.model_id},
      {"provider_id", m.provider_id},
      {"variants", m.variants},
      {"per_category", m.per_category},
      {"sampling", sampling},
      {"seeds", m.seeds},
      {"templates", templates},
      {"created_at", m.created_at},
      {"updated_at", m.updated_at},
      {"tool_version", m.tool_version},
      {"sealed", m.sealed},
      {"files", {{"tasks", kTasks}, {"outcomes", kOutcomes}, {"review", kReview}}},
  };
  if (m.profile) j["profile"] = *m.profile;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.schema_version = required<int>(j, "schema_version");
  if (m.schema_version != kSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version " + std::to_string(m.schema_version));
  }
  m.run_id = required<std::string>(j, "run_id");
  m.model_id = j.value("model_id", "");
  m.provider_id = j.value("provider_id", "");
  m.variants = j.value("variants", std::vector<std::string>{});
  m.per_category = j.value("per_category", std::map<std::string, int>{});
  if (j.contains("sampling")) {
    for (const auto& [v, p] : j.at("sampling").items()) {
      m.sampling[v] = {p.at("n_feasible").get<int>(), p.at("n_infeasible").get<int>(),
                       p.at("seed").get<std::uint64_t>()};
    }
  }
  m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
  if (j.contains("templates")) {
    for (const auto& t : j.at("templates")) {
      m.templates.push_back({t.at("key").get<std::string>(), t.at("sha256").get<std::string>(),
                             t.value("source", "")});
    }
  }
  if (j.contains("profile")) m.profile = j.at("profile");
  m.created_at = j.value("created_at", "");
  m.updated_at = j.value("updated_at", "");
  m.tool_version = j.value("tool_version", "");
  m.sealed = j.value("sealed", false);
  return m;
}

json to_json(const TaskRecord& r) {
  json j = {
      {"id", r.id},
      {"variant", slug(r.variant)},
      {"feasible", is_feasible(r.label)},
      {"type", slug(target_type(r.label))},
      {"reason", nullptr},
      {"status", slug(r.status)},
      {"text", r.text},
      {"raw_response", r.raw_response},
      {"model_id", r.model_id},
      {"created_at", r.created_at},
      {"attempts", r.attempts},
      {"note", r.note},
  };
  if (const auto* inf = std::get_if<Infeasible>(&r.label)) j["reason"] = slug(inf->reason);
  return j;
}

TaskRecord task_from_json(const json& j) {
  TaskRecord r;
  r.id = required<std::string>(j, "id");
  const auto variant = variant_from_slug(required<std::string>(j, "variant"));
  if (!variant) throw std::invalid_argument("unknown variant");
  r.variant = *variant;
  const auto type = type_from_slug(required<std::string>(j, "type"));
  if (!type) throw std::invalid_argument("unknown self-knowledge type");
  if (required<bool>(j, "feasible")) {
    r.label = Feasible{*type};
  } else {
    const auto reason = reason_from_slug(required<std::string>(j, "reason"));
    if (!reason) throw std::invalid_argument("unknown reason");
    if (type_of(*reason) != *type) throw std::invalid_argument("reason does not belong to type");
    r.label = Infeasible{*reason};
  }
  const auto status = task_status_from_slug(required<std::string>(j, "status"));
  if (!status) throw std::invalid_argument("unknown status");
  r.status = *status;
  r.text = j.value("text", "");
  r.raw_response = j.value("raw_response", "");
  r.model_id = j.value("model_id", "");
  r.created_at = j.value("created_at", "");
  r.attempts = j.value("attempts", 0);
  r.note = j.value("note", "");
  if (r.status == TaskStatus::Valid && trim(r.text).empty()) {
    throw std::invalid_argument("valid task has empty text");
  }
  return r;
}

json to_json(const ClassificationOutcome& o) {
  json j = {{"task_id", o.task_id}};
  if (const auto* a = std::get_if<Answered>(&o.verdict)) {
    j["verdict"] = "answered";
    j["reason"] = nullptr;
    j["answer"] = a->answer_text;
  } else if (const auto* d = std::get_if<DeclaredInfeasible>(&o.verdict)) {
    j["verdict"] = "infeasible";
    j["reason"] = slug(d->reason);
  } else {
    j["verdict"] = "parse_failure";
    j["reason"] = nullptr;
  }
  j["raw_response"] = o.raw_response;
  j["model_id"] = o.model_id;
  j["created_at"] = o.created_at;
  return j;
}

ClassificationOutcome outcome_from_json(const json& j) {
  ClassificationOutcome o;
  o.task_id = required<std::string>(j, "task_id");
  o.raw_response = j.value("raw_response", "");
  o.model_id = j.value("model_id", "");
  o.created_at = j.value("created_at", "");
  const auto verdict = required<std::string>(j, "verdict");
  if (verdict == "answered") {
    o.verdict = Answered{j.value("answer", "")};
  } else if (verdict == "infeasible") {
    const auto reason = reason_from_slug(required<std::string>(j, "reason"));
    if (!reason) throw std::invalid_argument("unknown reason");
    o.verdict = DeclaredInfeasible{*reason};
  } else if (verdict == "parse_failure") {
    o.verdict = ParseFailure{o.raw_response};
  } else {
    throw std::invalid_argument("unknown verdict '" + verdict + "'");
  }
  return o;
}

std::vector<TemplateFingerprint> fingerprints_of(const TemplateSet& templates) {
  std::vector<TemplateFingerprint> out;
  for (const auto& t : templates.all()) {
    out.push_back({std::string(slug(t.kind)) + "." + std::string(slug(t.variant)),
                   sha256_hex(t.body), t.source.empty() ? "" : fs::absolute(t.source).string()});
  }
  return out;
}

// --- LoadedRun -------------------------------------------------------------

std::vector<TaskRecord> LoadedRun::reviewed_tasks() const {
  return validate_tasks(tasks, decisions).records;
}

const TaskRecord* LoadedRun::find_task(std::string_view id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

// --- RunStore --------------------------------------------------------------

struct RunStore::State {
  mutable std::mutex mu;
  RunManifest manifest;
  std::map<std::string, int> fds;

  ~State() {
    for (auto& [name, fd] : fds) ::close(fd);
  }
};

RunStore::RunStore(fs::path dir, std::unique_ptr<State> state)
    : dir_(std::move(dir)), state_(std::move(state)) {}
RunStore::RunStore(RunStore&&) noexcept = default;
RunStore& RunStore::operator=(RunStore&&) noexcept = default;
RunStore::~RunStore() = default;

bool RunStore::exists(const fs::path& dir) { return fs::exists(dir / kManifest); }

RunStore RunStore::create(const fs::path& dir, RunManifest manifest) {
  if (exists(dir)) throw StoreError("a run already exists at " + dir.string());
  fs::create_directories(dir);
  for (const char* f : {kTasks, kOutcomes, kReview}) {
    std::ofstream touch(dir / f, std::ios::app);
    if (!touch) throw StoreError("cannot create " + (dir / f).string());
  }
  write_manifest_file(dir, manifest);
  auto state = std::make_unique<State>();
  state->manifest = std::move(manifest);
  return RunStore(dir, std::move(state));
}

RunStore RunStore::open(const fs::path& dir) {
  auto state = std::make_unique<State>();
  state->manifest = read_manifest_file(dir);
  return RunStore(dir, std::move(state));
}

RunManifest RunStore::manifest() const {
  std::lock_guard lock(state_->mu);
  return state_->manifest;
}

bool RunStore::sealed() const {
  std::lock_guard lock(state_->mu);
  return state_->manifest.sealed;
}

void RunStore::append_line(const std::string& file, const json& j) {
  std::string line = j.dump();
  line += '\n';
  std::lock_guard lock(state_->mu);
  if (state_->manifest.sealed) {
    throw StoreError("run " + state_->manifest.run_id + " is sealed; cannot append to " + file);
  }
  auto it = state_->fds.find(file);
  if (it == state_->fds.end()) {
    const auto path = dir_ / file;
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
    it = state_->fds.emplace(file, fd).first;
  }
  const int fd = it->second;
  struct stat st {};
  if (::fstat(fd, &st) != 0) throw StoreError("cannot stat " + file + ": " + std::strerror(errno));
  const off_t before = st.st_size;

  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      const std::string err = std::strerror(errno);
      // Roll back the torn tail so no partial line survives.
      if (::ftruncate(fd, before) != 0) {
        throw StoreError("write to " + file + " failed (" + err + ") and rollback failed");
      }
      throw StoreError("write to " + file + " failed: " + err);
    }
    written += static_cast<std::size_t>(n);
  }
}

void RunStore::append_task(const TaskRecord& record) { append_line(kTasks, to_json(record)); }

void RunStore::append_outcome(const ClassificationOutcome& outcome) {
  append_line(kOutcomes, to_json(outcome));
}

void RunStore::append_flag(const ReviewItem& item) {
  append_line(kReview, {{"type", "flag"},
                        {"task_id", item.task_id},
                        {"issue", item.issue},
                        {"text", item.text},
                        {"decision", nullptr}});
}

void RunStore::append_decision(const std::string& task_id, ReviewDecision decision) {
  append_line(kReview, {{"type", "decision"}, {"task_id", task_id}, {"decision", slug(decision)}});
}

void RunStore::append_error(const FailedRequest& failure, std::string_view stage) {
  append_line(kErrors, {{"stage", stage},
                        {"task_id", failure.task_id},
                        {"request_id", failure.request_id},
                        {"kind", failure.kind},
                        {"message", failure.message}});
}

void RunStore::update_manifest(const std::function<void(RunManifest&)>& edit) {
  std::lock_guard lock(state_->mu);
  if (state_->manifest.sealed) throw StoreError("run " + state_->manifest.run_id + " is sealed");
  RunManifest copy = state_->manifest;
  edit(copy);
  write_manifest_file(dir_, copy);
  state_->manifest = std::move(copy);
}

void RunStore::seal() {
  std::lock_guard lock(state_->mu);
  if (state_->manifest.sealed) return;
  for (auto& [name, fd] : state_->fds) ::fsync(fd);
  RunManifest copy = state_->manifest;
  copy.sealed = true;
  write_manifest_file(dir_, copy);
  state_->manifest = std::move(copy);
}

LoadedRun RunStore::load() const { return load_run(dir_); }

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.manifest = read_manifest_file(dir);

  for (const char* f : {kTasks, kOutcomes, kReview}) {
    if (!fs::exists(dir / f)) throw IntegrityError("run is missing " + std::string(f));
  }
  for (const auto& t : run.manifest.templates) {
    if (t.source.empty()) continue;
    if (!fs::exists(t.source)) {
      throw IntegrityError("template file " + t.source + " recorded for " + t.key + " is gone");
    }
    if (sha256_hex(read_file(t.source)) != t.sha256) {
      throw IntegrityError("template file " + t.source + " changed since the run used it");
    }
  }

  std::set<std::string> task_ids;
  std::map<std::string, std::size_t> position;
  for_each_line(dir / kTasks, [&](const json& j, std::size_t line) {
    auto rec = task_from_json(j);
    auto [it, fresh] = position.emplace(rec.id, run.tasks.size());
    if (fresh) {
      task_ids.insert(rec.id);
      run.tasks.push_back(std::move(rec));
      return;
    }
    // A slot the provider failed on may be regenerated; the later line wins.
    if (run.tasks[it->second].status != TaskStatus::Failed) {
      throw IntegrityError(std::string(kTasks) + ":" + std::to_string(line) +
                           ": duplicate task id " + rec.id);
    }
    run.tasks[it->second] = std::move(rec);
  });

  std::set<std::string> classified;
  for_each_line(dir / kOutcomes, [&](const json& j, std::size_t line) {
    auto o = outcome_from_json(j);
    const auto where = std::string(kOutcomes) + ":" + std::to_string(line);
    if (!task_ids.contains(o.task_id)) {
      throw IntegrityError(where + ": outcome refers to unknown task " + o.task_id);
    }
    if (!classified.insert(o.task_id).second) {
      throw IntegrityError(where + ": second outcome for task " + o.task_id);
    }
    run.outcomes.push_back(std::move(o));
  });

  for_each_line(dir / kReview, [&](const json& j, std::size_t line) {
    const auto type = required<std::string>(j, "type");
    const auto id = required<std::string>(j, "task_id");
    if (type == "flag") {
      run.flagged.push_back({id, j.value("issue", ""), j.value("text", "")});
      // A reviewer may fill in the decision field of the flag line in place.
      if (j.contains("decision") && j.at("decision").is_string()) {
        auto d = review_decision_from_slug(j.at("decision").get<std::string>());
        if (!d) throw std::invalid_argument("unknown review decision");
        run.decisions[id] = *d;
      }
    } else if (type == "decision") {
      auto d = review_decision_from_slug(required<std::string>(j, "decision"));
      if (!d) throw std::invalid_argument("unknown review decision");
      run.decisions[id] = *d;
    } else {
      throw std::invalid_argument("unknown review line type '" + type + "'");
    }
    if (!task_ids.contains(id)) {
      throw IntegrityError(std::string(kReview) + ":" + std::to_string(line) +
                           ": review refers to unknown task " + id);
    }
  });
  return run;
}

}  // namespace skeval
