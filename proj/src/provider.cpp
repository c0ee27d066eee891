#include "skeval/provider.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "skeval/util.hpp"

namespace skeval {

void check_request(const CompletionRequest& request) {
  if (request.prompt_text.empty()) throw std::invalid_argument("completion request has no prompt");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw std::invalid_argument(fmt::format("temperature {} outside [0, 2]", request.temperature));
  }
  if (request.max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

Gateway::Gateway(std::unique_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)),
      options_(std::move(options)),
      provider_id_(provider_->id()),
      slots_(std::max(1, options_.max_in_flight)) {
  if (options_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
  if (options_.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

CompletionResult Gateway::complete(const CompletionRequest& request) {
  check_request(request);
  const auto start = std::chrono::steady_clock::now();
  auto backoff = options_.initial_backoff;

  auto fail = [&](const ProviderFailure& e) {
    if (options_.on_failure) options_.on_failure(e);
  };

  for (int attempt = 1;; ++attempt) {
    std::optional<RetryableFailure> retry;
    try {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      std::string text = provider_->attempt(request);
      return {std::move(text),
              std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start),
              attempt, provider_id_};
    } catch (const RetryableFailure& e) {
      retry = e;
    } catch (const ProviderFailure& e) {
      fail(e);
      throw;
    }

    if (attempt >= options_.max_attempts) {
      const auto msg = fmt::format("{}: giving up after {} attempts: {}", request.request_id,
                                   attempt, retry->what());
      switch (retry->cause()) {
        case RetryableFailure::Cause::RateLimited: {
          RateLimitExhausted e(msg, request.request_id);
          fail(e);
          throw e;
        }
        case RetryableFailure::Cause::Transport: {
          TransportError e(msg, request.request_id);
          fail(e);
          throw e;
        }
        case RetryableFailure::Cause::Server:
          break;
      }
      ProviderError e(msg, request.request_id);
      fail(e);
      throw e;
    }
    options_.sleep(backoff);
    backoff = std::min(backoff * 2, options_.max_backoff);
  }
}

// ---------------------------------------------------------------------------

namespace {

double read_prob(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("profile field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

TypeBehavior behavior_from_json(const nlohmann::json& j, TypeBehavior base) {
  if (!j.is_object()) throw ConfigError("profile behaviour must be an object");
  base.p_over = read_prob(j, "p_over", base.p_over);
  base.p_conserv = read_prob(j, "p_conserv", base.p_conserv);
  if (j.contains("confusion")) {
    ConfusionSpec c;
    c.self = 0.0;
    for (const auto& [key, v] : j.at("confusion").items()) {
      if (!v.is_number()) throw ConfigError("confusion weight for '" + key + "' must be a number");
      if (key == "self") {
        c.self = v.get<double>();
      } else if (auto r = reason_from_slug(key)) {
        c.reasons[index_of(*r)] = v.get<double>();
      } else {
        throw ConfigError("unknown reason '" + key + "' in confusion");
      }
    }
    base.confusion = c;
  }
  return base;
}

nlohmann::json behavior_to_json(const TypeBehavior& b) {
  nlohmann::json confusion = nlohmann::json::object();
  if (b.confusion.self != 0.0) confusion["self"] = b.confusion.self;
  for (auto r : kAllReasons) {
    if (b.confusion.reasons[index_of(r)] != 0.0) {
      confusion[std::string(slug(r))] = b.confusion.reasons[index_of(r)];
    }
  }
  return {{"p_over", b.p_over}, {"p_conserv", b.p_conserv}, {"confusion", confusion}};
}

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

// Picks the declared reason for a task of type `type` whose own reason (if
// infeasible) is `own`.
InfeasibilityReason draw_reason(const ConfusionSpec& c, SelfKnowledgeType type,
                                std::optional<InfeasibilityReason> own, SplitMix64& rng) {
  const double u = rng.uniform();
  const auto pick_self = [&] {
    if (own) return *own;
    const auto candidates = reasons_of(type);
    return candidates[rng.below(candidates.size())];
  };
  double acc = c.self;
  if (u < acc) return pick_self();
  for (auto r : kAllReasons) {
    acc += c.reasons[index_of(r)];
    if (u < acc) return r;
  }
  // u landed in the rounding gap at the top; give it to the last nonzero entry.
  for (auto it = kAllReasons.rbegin(); it != kAllReasons.rend(); ++it) {
    if (c.reasons[index_of(*it)] > 0.0) return *it;
  }
  return pick_self();
}

}  // namespace

void SubjectProfile::validate() const {
  if (!in_unit(p_garbled)) throw ConfigError(fmt::format("p_garbled {} outside [0, 1]", p_garbled));
  for (auto t : kAllTypes) {
    const auto& b = (*this)[t];
    const auto name = std::string(slug(t));
    if (!in_unit(b.p_over)) throw ConfigError(fmt::format("{}: p_over {} outside [0, 1]", name, b.p_over));
    if (!in_unit(b.p_conserv)) {
      throw ConfigError(fmt::format("{}: p_conserv {} outside [0, 1]", name, b.p_conserv));
    }
    double sum = b.confusion.self;
    if (!in_unit(b.confusion.self)) throw ConfigError(name + ": confusion weight outside [0, 1]");
    for (double w : b.confusion.reasons) {
      if (!in_unit(w)) throw ConfigError(name + ": confusion weight outside [0, 1]");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError(fmt::format("{}: confusion weights sum to {}, not 1", name, sum));
    }
  }
}

SubjectProfile SubjectProfile::echo(std::uint64_t seed) { return uniform(0.0, 0.0, seed); }

SubjectProfile SubjectProfile::uniform(double p_over, double p_conserv, std::uint64_t seed) {
  SubjectProfile p;
  p.seed = seed;
  for (auto& b : p.types) {
    b.p_over = p_over;
    b.p_conserv = p_conserv;
  }
  return p;
}

SubjectProfile SubjectProfile::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("profile must be a JSON object");
  SubjectProfile p;
  try {
    p.seed = j.value("seed", std::uint64_t{0});
    p.p_garbled = read_prob(j, "p_garbled", 0.0);
    TypeBehavior base;
    if (j.contains("default")) base = behavior_from_json(j.at("default"), base);
    for (auto& b : p.types) b = base;
    if (j.contains("types")) {
      for (const auto& [key, v] : j.at("types").items()) {
        auto t = type_from_slug(key);
        if (!t) throw ConfigError("unknown self-knowledge type '" + key + "' in profile");
        p[*t] = behavior_from_json(v, base);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid profile: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json SubjectProfile::to_json() const {
  nlohmann::json types = nlohmann::json::object();
  for (auto t : kAllTypes) types[std::string(slug(t))] = behavior_to_json((*this)[t]);
  return {{"seed", seed}, {"p_garbled", p_garbled}, {"types", types}};
}

Verdict scripted_verdict(const SubjectProfile& profile, std::string_view task_id,
                         const FeasibilityLabel& label) {
  SplitMix64 rng(fnv1a64(task_id) ^ (profile.seed * 0x9E3779B97F4A7C15ULL));
  const auto type = target_type(label);
  const auto& b = profile[type];

  if (profile.p_garbled > 0.0 && rng.uniform() < profile.p_garbled) {
    return ParseFailure{};
  }
  const double u = rng.uniform();
  if (const auto* inf = std::get_if<Infeasible>(&label)) {
    if (u < b.p_conserv) return Answered{};
    return DeclaredInfeasible{draw_reason(b.confusion, type, inf->reason, rng)};
  }
  if (u < b.p_over) return DeclaredInfeasible{draw_reason(b.confusion, type, std::nullopt, rng)};
  return Answered{};
}

std::string format_verdict_response(const Verdict& verdict) {
  if (std::holds_alternative<ParseFailure>(verdict)) {
    return "I looked at this task but I am not going to commit to a verdict.";
  }
  if (const auto* d = std::get_if<DeclaredInfeasible>(&verdict)) {
    return fmt::format("I am not able to complete this task.\n\nVERDICT: INFEASIBLE\nREASON: {}",
                       slug(d->reason));
  }
  const auto& a = std::get<Answered>(verdict);
  const std::string body = a.answer_text.empty() ? "Here is my complete answer to the task."
                                                  : a.answer_text;
  return body + "\n\nVERDICT: ANSWERED";
}

ClassificationOutcome scripted_complete(const SubjectProfile& profile, const TaskRecord& task) {
  ClassificationOutcome out;
  out.task_id = task.id;
  out.verdict = scripted_verdict(profile, task.id, task.label);
  out.raw_response = format_verdict_response(out.verdict);
  if (auto* a = std::get_if<Answered>(&out.verdict)) {
    a->answer_text = "Here is my complete answer to the task.";
  } else if (auto* p = std::get_if<ParseFailure>(&out.verdict)) {
    p->raw_text = out.raw_response;
  }
  return out;
}

std::string scripted_task_text(std::string_view task_id, const FeasibilityLabel& label) {
  if (const auto* f = std::get_if<Feasible>(&label)) {
    return fmt::format("Synthetic feasible task {} probing {}. {}", task_id,
                       display_name(f->type), description(f->type));
  }
  const auto r = std::get<Infeasible>(label).reason;
  return fmt::format("Synthetic infeasible task {} built around {}. {}", task_id,
                     display_name(r), description(r));
}

ScriptedProvider::ScriptedProvider(SubjectProfile profile, std::string id)
    : profile_(std::move(profile)), id_(std::move(id)) {
  profile_.validate();
}

std::string ScriptedProvider::attempt(const CompletionRequest& request) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
    auto it = injections_.find(request.request_id);
    if (it != injections_.end() && it->second.remaining != 0) {
      if (it->second.remaining > 0) --it->second.remaining;
      switch (it->second.what) {
        case Injected::Provider:
          throw ProviderError("scripted provider error for " + request.request_id,
                              request.request_id);
        case Injected::Auth:
          throw AuthError("scripted auth error for " + request.request_id, request.request_id);
        case Injected::RateLimit:
          throw RetryableFailure(RetryableFailure::Cause::RateLimited, "HTTP 429 (scripted)");
      }
    }
    auto scripted = scripted_text_.find(request.request_id);
    if (scripted != scripted_text_.end()) return scripted->second;
  }
  if (!request.context) {
    throw ProviderError("scripted provider needs a request context", request.request_id);
  }
  const auto& ctx = *request.context;
  if (ctx.kind == PromptKind::Classify) {
    return format_verdict_response(scripted_verdict(profile_, ctx.task_id, ctx.label));
  }
  return "TASK: " + scripted_task_text(ctx.task_id, ctx.label);
}

void ScriptedProvider::fail_with_provider_error(const std::string& request_id, int times) {
  std::lock_guard lock(mu_);
  injections_[request_id] = {Injected::Provider, times};
}

void ScriptedProvider::fail_with_rate_limit(const std::string& request_id, int times) {
  std::lock_guard lock(mu_);
  injections_[request_id] = {Injected::RateLimit, times};
}

void ScriptedProvider::fail_with_auth_error(const std::string& request_id, int times) {
  std::lock_guard lock(mu_);
  injections_[request_id] = {Injected::Auth, times};
}

void ScriptedProvider::script_generation(const std::string& request_id, std::string text) {
  std::lock_guard lock(mu_);
  scripted_text_[request_id] = std::move(text);
}

int ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace skeval
