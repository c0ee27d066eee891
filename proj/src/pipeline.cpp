#include "skeval/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "skeval/errors.hpp"

namespace skeval {

namespace {

// Delivers items to a callback in index order, whatever order they finish in.
template <typename T>
class OrderedSink {
 public:
  explicit OrderedSink(std::function<void(const T&)> fn) : fn_(std::move(fn)) {}

  void put(std::size_t index, const T& item) {
    if (!fn_) return;
    std::lock_guard lock(mu_);
    pending_.emplace(index, item);
    drain();
  }

  // Marks an index that will never produce an item.
  void skip(std::size_t index) {
    if (!fn_) return;
    std::lock_guard lock(mu_);
    skipped_.insert(index);
    drain();
  }

 private:
  void drain() {
    for (;;) {
      if (skipped_.erase(next_) > 0) {
        ++next_;
        continue;
      }
      auto it = pending_.find(next_);
      if (it == pending_.end()) return;
      fn_(it->second);
      pending_.erase(it);
      ++next_;
    }
  }

  std::function<void(const T&)> fn_;
  std::mutex mu_;
  std::map<std::size_t, T> pending_;
  std::set<std::size_t> skipped_;
  std::size_t next_ = 0;
};

// Line-start phrases that mark a refusal or a meta-answer instead of a task.
constexpr std::array<std::string_view, 14> kRefusalMarkers = {
    "i cannot",       "i can't",          "i can not",          "i'm sorry",
    "i am sorry",     "sorry, but",       "as an ai",           "i'm unable to",
    "i am unable to", "i won't",          "i will not",         "i'm not able to",
    "i am not able to", "i must decline",
};

constexpr std::size_t kMinTaskLength = 20;

std::string strip_decoration(std::string_view line) {
  line = trim(line);
  const auto deco = [](char c) { return c == '*' || c == '`' || c == '#' || c == '_' || c == '>'; };
  while (!line.empty() && deco(line.front())) line.remove_prefix(1);
  while (!line.empty() && deco(line.back())) line.remove_suffix(1);
  return std::string(trim(line));
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

std::optional<InfeasibilityReason> resolve_reason(std::string_view text) {
  std::string s(trim(text));
  const auto strip = [](char c) {
    return c == '"' || c == '\'' || c == '<' || c == '>' || c == '[' || c == ']' || c == '.' ||
           c == '`' || c == '*';
  };
  while (!s.empty() && strip(s.front())) s.erase(s.begin());
  while (!s.empty() && strip(s.back())) s.pop_back();
  if (auto r = reason_from_slug(s)) return r;
  return reason_from_loose_name(s);
}

const std::regex& verdict_answered_re() {
  static const std::regex re(R"(^verdict\s*:\s*answered$)", std::regex::icase);
  return re;
}
const std::regex& verdict_infeasible_re() {
  static const std::regex re(R"(^verdict\s*:\s*infeasible$)", std::regex::icase);
  return re;
}
const std::regex& reason_re() {
  static const std::regex re(R"(^reason\s*:\s*(.+)$)", std::regex::icase);
  return re;
}
const std::regex& one_line_re() {
  static const std::regex re(R"(^verdict\s*:\s*infeasible\s*[/;,|]?\s*reason\s*:\s*(.+)$)",
                             std::regex::icase);
  return re;
}

}  // namespace

std::string_view slug(TaskStatus s) {
  switch (s) {
    case TaskStatus::Valid:
      return "valid";
    case TaskStatus::Malformed:
      return "malformed";
    case TaskStatus::Discarded:
      return "discarded";
    case TaskStatus::Failed:
      return "failed";
  }
  return "";
}

std::optional<TaskStatus> task_status_from_slug(std::string_view s) {
  for (auto st : {TaskStatus::Valid, TaskStatus::Malformed, TaskStatus::Discarded,
                  TaskStatus::Failed}) {
    if (slug(st) == s) return st;
  }
  return std::nullopt;
}

int GenerationPlan::total_feasible() const {
  int n = 0;
  for (int c : feasible_per_type) n += c;
  return n;
}

int GenerationPlan::total_infeasible() const {
  int n = 0;
  for (int c : infeasible_per_type) n += c;
  return n;
}

GenerationPlan plan_generation(int per_category, PromptVariant variant) {
  if (per_category < 1) throw std::invalid_argument("per_category must be at least 1");
  GenerationPlan plan;
  plan.variant = variant;
  plan.per_category = per_category;
  int f_index = 0;
  int i_index = 0;
  const auto id = [&](char side, int n) {
    return fmt::format("{}-{}-{:06d}", slug(variant), side, n);
  };
  for (auto t : kAllTypes) {
    plan.feasible_per_type[index_of(t)] = per_category;
    for (int k = 0; k < per_category; ++k) plan.slots.push_back({id('f', ++f_index), Feasible{t}});
  }
  for (auto t : kAllTypes) {
    plan.infeasible_per_type[index_of(t)] = per_category;
    const auto reasons = reasons_of(t);
    const int base = per_category / static_cast<int>(reasons.size());
    const int extra = per_category % static_cast<int>(reasons.size());
    for (std::size_t j = 0; j < reasons.size(); ++j) {
      const int quota = base + (static_cast<int>(j) < extra ? 1 : 0);
      plan.reason_quota[index_of(reasons[j])] = quota;
      for (int k = 0; k < quota; ++k) {
        plan.slots.push_back({id('i', ++i_index), Infeasible{reasons[j]}});
      }
    }
  }
  return plan;
}

std::string generation_request_id(std::string_view task_id) {
  return std::string(task_id) + ":generate";
}

std::string classification_request_id(std::string_view task_id) {
  return std::string(task_id) + ":classify";
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string extract_task_text(std::string_view response) {
  const auto lines = split_lines(response);
  std::optional<std::size_t> marker;
  std::string first;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto clean = strip_decoration(lines[i]);
    if (clean.size() >= 5 && to_lower(clean.substr(0, 5)) == "task:") {
      marker = i;
      first = strip_decoration(std::string_view(clean).substr(5));
    }
  }
  if (!marker) return std::string(trim(response));
  std::string out = first;
  for (std::size_t i = *marker + 1; i < lines.size(); ++i) {
    if (!out.empty()) out += '\n';
    out += lines[i];
  }
  return std::string(trim(out));
}

std::optional<std::string> automatic_check(std::string_view text) {
  const auto t = trim(text);
  if (t.empty()) return "empty task text";
  if (t.size() < kMinTaskLength) {
    return fmt::format("task text shorter than {} characters", kMinTaskLength);
  }
  for (auto line : split_lines(t)) {
    const auto lower = to_lower(strip_decoration(line));
    for (auto marker : kRefusalMarkers) {
      if (lower.starts_with(marker)) return fmt::format("refusal marker \"{}\"", marker);
    }
  }
  static const std::regex placeholder(R"(\{[a-z_]+\})");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(t.begin(), t.end(), m, placeholder)) {
    return "unresolved template placeholder " + m.str();
  }
  return std::nullopt;
}

std::vector<TaskRecord> run_generation(const GenerationPlan& plan, Gateway& gateway,
                                       const PromptForge& forge,
                                       const GenerationOptions& options) {
  std::vector<TaskRecord> records(plan.slots.size());
  OrderedSink<TaskRecord> sink(options.on_record);

  parallel_for(plan.slots.size(), gateway.max_in_flight(), [&](std::size_t i) {
    const auto& slot = plan.slots[i];
    TaskRecord rec;
    rec.id = slot.task_id;
    rec.label = slot.label;
    rec.variant = plan.variant;
    rec.model_id = options.model_id;

    CompletionRequest req;
    req.request_id = generation_request_id(slot.task_id);
    req.model_id = options.model_id;
    req.prompt_text = forge.generation_prompt(slot.label, plan.variant).text;
    req.temperature = kGenerationTemperature;
    req.max_tokens = options.max_tokens;
    req.context = RequestContext{slot.task_id, slot.label,
                                 is_feasible(slot.label) ? PromptKind::GenerateFeasible
                                                         : PromptKind::GenerateInfeasible};

    for (int attempt = 0; attempt <= options.malformed_retries; ++attempt) {
      ++rec.attempts;
      try {
        auto result = gateway.complete(req);
        rec.raw_response = std::move(result.text);
        rec.text = extract_task_text(rec.raw_response);
      } catch (const AuthError&) {
        throw;
      } catch (const ProviderFailure& e) {
        rec.status = TaskStatus::Failed;
        rec.note = std::string(e.kind()) + ": " + e.what();
        rec.text.clear();
        break;
      }
      if (auto issue = automatic_check(rec.text)) {
        rec.status = TaskStatus::Malformed;
        rec.note = *issue;
        continue;
      }
      rec.status = TaskStatus::Valid;
      rec.note.clear();
      break;
    }
    rec.created_at = options.clock();
    records[i] = rec;
    sink.put(i, rec);
  });
  return records;
}

std::string_view slug(ReviewDecision d) {
  return d == ReviewDecision::Discard ? "discard" : "restore";
}

std::optional<ReviewDecision> review_decision_from_slug(std::string_view s) {
  if (s == "discard") return ReviewDecision::Discard;
  if (s == "restore") return ReviewDecision::Restore;
  return std::nullopt;
}

ValidationResult validate_tasks(std::vector<TaskRecord> records,
                                const std::map<std::string, ReviewDecision>& decisions) {
  ValidationResult out;
  for (auto& rec : records) {
    if (rec.status == TaskStatus::Failed) continue;
    if (rec.status == TaskStatus::Valid || rec.status == TaskStatus::Malformed) {
      if (auto issue = automatic_check(rec.text)) {
        rec.status = TaskStatus::Malformed;
        rec.note = *issue;
      } else {
        rec.status = TaskStatus::Valid;
        rec.note.clear();
      }
    }
    auto d = decisions.find(rec.id);
    if (d != decisions.end()) {
      if (d->second == ReviewDecision::Discard) {
        rec.status = TaskStatus::Discarded;
      } else if (rec.status == TaskStatus::Malformed || rec.status == TaskStatus::Discarded) {
        rec.status = TaskStatus::Valid;
      }
    } else if (rec.status == TaskStatus::Malformed) {
      out.queued.push_back({rec.id, rec.note, rec.text});
    }
  }
  out.records = std::move(records);
  return out;
}

std::array<int, kNumTypes> type_quotas(int n) {
  std::array<int, kNumTypes> q{};
  const int k = static_cast<int>(kNumTypes);
  for (int i = 0; i < k; ++i) q[i] = n / k + (i < n % k ? 1 : 0);
  return q;
}

std::vector<TaskRecord> sample_balanced(const std::vector<TaskRecord>& records,
                                        const SamplingPlan& plan) {
  if (plan.n_feasible < 0 || plan.n_infeasible < 0) {
    throw std::invalid_argument("sample sizes must be non-negative");
  }
  SplitMix64 rng(plan.seed);
  std::vector<TaskRecord> picked;

  for (bool feasible : {true, false}) {
    const auto quotas = type_quotas(feasible ? plan.n_feasible : plan.n_infeasible);
    for (auto t : kAllTypes) {
      std::vector<const TaskRecord*> pool;
      for (const auto& r : records) {
        if (r.status == TaskStatus::Valid && is_feasible(r.label) == feasible &&
            target_type(r.label) == t) {
          pool.push_back(&r);
        }
      }
      std::sort(pool.begin(), pool.end(),
                [](const TaskRecord* a, const TaskRecord* b) { return a->id < b->id; });
      const auto quota = static_cast<std::size_t>(quotas[index_of(t)]);
      if (pool.size() < quota) {
        throw InsufficientTasks(
            fmt::format("need {} {} tasks for {} but only {} are valid", quota,
                        feasible ? "feasible" : "infeasible", slug(t), pool.size()),
            std::string(slug(t)));
      }
      // Partial Fisher-Yates: the first `quota` entries become the sample.
      for (std::size_t j = 0; j < quota; ++j) {
        const auto k = j + rng.below(pool.size() - j);
        std::swap(pool[j], pool[k]);
        picked.push_back(*pool[j]);
      }
    }
  }
  for (std::size_t j = picked.size(); j > 1; --j) {
    std::swap(picked[j - 1], picked[rng.below(j)]);
  }
  return picked;
}

ClassificationRun run_classification(const std::vector<TaskRecord>& tasks, Gateway& gateway,
                                     const PromptForge& forge,
                                     const ClassificationOptions& options) {
  std::vector<std::optional<ClassificationOutcome>> slots(tasks.size());
  std::vector<std::optional<FailedRequest>> failed(tasks.size());
  OrderedSink<ClassificationOutcome> sink(options.on_outcome);

  parallel_for(tasks.size(), gateway.max_in_flight(), [&](std::size_t i) {
    const auto& task = tasks[i];
    CompletionRequest req;
    req.request_id = classification_request_id(task.id);
    req.model_id = options.model_id;
    req.prompt_text = forge.classification_prompt(task.text, task.variant).text;
    req.temperature = kClassificationTemperature;
    req.max_tokens = options.max_tokens;
    req.context = RequestContext{task.id, task.label, PromptKind::Classify};
    try {
      auto result = gateway.complete(req);
      ClassificationOutcome out;
      out.task_id = task.id;
      out.verdict = parse_verdict(result.text);
      out.raw_response = std::move(result.text);
      out.model_id = options.model_id;
      out.created_at = options.clock();
      slots[i] = out;
      sink.put(i, out);
    } catch (const AuthError&) {
      throw;
    } catch (const ProviderFailure& e) {
      failed[i] = FailedRequest{task.id, req.request_id, e.kind(), e.what()};
      sink.skip(i);
    }
  });

  ClassificationRun run;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (slots[i]) run.outcomes.push_back(std::move(*slots[i]));
    if (failed[i]) run.failures.push_back(std::move(*failed[i]));
  }
  return run;
}

Verdict parse_verdict(std::string_view raw_response) {
  const auto lines = split_lines(raw_response);
  // Indices of non-empty lines, last first.
  std::vector<std::size_t> nonempty;
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (!trim(lines[i]).empty()) nonempty.push_back(i);
    if (nonempty.size() == 2) break;
  }
  const ParseFailure failure{std::string(raw_response)};
  if (nonempty.empty()) return failure;

  const std::string last = strip_decoration(lines[nonempty[0]]);
  std::smatch m;

  if (std::regex_match(last, verdict_answered_re())) {
    std::string answer;
    for (std::size_t i = 0; i < nonempty[0]; ++i) {
      answer += lines[i];
      answer += '\n';
    }
    return Answered{std::string(trim(answer))};
  }
  if (std::regex_match(last, m, one_line_re())) {
    if (auto r = resolve_reason(m[1].str())) return DeclaredInfeasible{*r};
    return failure;
  }
  if (std::regex_match(last, m, reason_re()) && nonempty.size() == 2) {
    const std::string prev = strip_decoration(lines[nonempty[1]]);
    if (!std::regex_match(prev, verdict_infeasible_re())) return failure;
    if (auto r = resolve_reason(m[1].str())) return DeclaredInfeasible{*r};
  }
  return failure;
}

}  // namespace skeval
