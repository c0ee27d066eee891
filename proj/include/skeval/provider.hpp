#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "skeval/errors.hpp"
#include "skeval/prompt_forge.hpp"
#include "skeval/records.hpp"
#include "skeval/taxonomy.hpp"

namespace skeval {

inline constexpr double kGenerationTemperature = 1.0;
inline constexpr double kClassificationTemperature = 0.0;
inline constexpr int kGenerationMaxTokens = 1024;
inline constexpr int kClassificationMaxTokens = 2048;

// What the pipeline knows about a request. Real providers ignore it; the
// scripted subject needs it to play its part.
struct RequestContext {
  std::string task_id;
  FeasibilityLabel label;
  PromptKind kind;
};

struct CompletionRequest {
  std::string request_id;
  std::string model_id;
  std::string prompt_text;
  double temperature = 0.0;
  int max_tokens = kGenerationMaxTokens;
  std::optional<RequestContext> context;
};

// Throws std::invalid_argument on an empty prompt, temperature outside
// [0, 2] or non-positive max_tokens.
void check_request(const CompletionRequest& request);

struct CompletionResult {
  std::string text;
  std::chrono::milliseconds latency{0};
  int attempt_count = 1;
  std::string provider_id;
};

// Thrown by Provider::attempt for failures worth retrying.
class RetryableFailure : public std::runtime_error {
 public:
  enum class Cause { RateLimited, Transport, Server };
  RetryableFailure(Cause cause, const std::string& what)
      : std::runtime_error(what), cause_(cause) {}
  Cause cause() const { return cause_; }

 private:
  Cause cause_;
};

// One model endpoint. attempt() makes a single try and either returns the
// completion text or throws RetryableFailure / a ProviderFailure subclass.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual std::string attempt(const CompletionRequest& request) = 0;
};

struct GatewayOptions {
  // Upper bound on attempts per request, the first one included.
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
  int max_in_flight = 4;
  // Called once for every request that ends in an error.
  std::function<void(const ProviderFailure&)> on_failure;
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Retry, backoff and concurrency limiting in front of a Provider. Safe to
// call from several threads; at most max_in_flight attempts run at once.
class Gateway {
 public:
  Gateway(std::unique_ptr<Provider> provider, GatewayOptions options = {});

  CompletionResult complete(const CompletionRequest& request);

  const std::string& provider_id() const { return provider_id_; }
  int max_in_flight() const { return options_.max_in_flight; }

 private:
  std::unique_ptr<Provider> provider_;
  GatewayOptions options_;
  std::string provider_id_;
  std::counting_semaphore<> slots_;
};

// OpenAI-compatible chat-completions endpoint.
struct HttpProviderConfig {
  std::string name;
  // Full URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model;
  std::string auth_header = "Authorization";
  // Prefix put before the key in the auth header ("Bearer"); may be empty.
  std::string auth_scheme = "Bearer";
  // Environment variable holding the credential.
  std::string api_key_env;
  std::chrono::seconds timeout{120};
  int max_attempts = 5;
  int max_in_flight = 4;

  static HttpProviderConfig from_json(const std::string& name, const nlohmann::json& j);
};

class HttpProvider : public Provider {
 public:
  // Reads the credential from the environment; throws AuthError if unset.
  explicit HttpProvider(HttpProviderConfig config);
  ~HttpProvider() override;

  std::string id() const override { return config_.name; }
  std::string attempt(const CompletionRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string api_key_;
  std::string base_url_;
  std::string path_;
};

// Request body in the chat-completion wire format.
nlohmann::json chat_request_body(const CompletionRequest& request);
// choices[0].message.content; throws ProviderError when absent.
std::string chat_response_text(const nlohmann::json& body, const std::string& request_id);

// ---------------------------------------------------------------------------
// Scripted subject

// Distribution over the reason a subject gives when it declares a task
// infeasible. `self` is the mass on the task's own reason (for a feasible
// task: a reason of its target type, chosen uniformly); `reasons` holds the
// mass on specific reasons.
struct ConfusionSpec {
  double self = 1.0;
  std::array<double, kNumReasons> reasons{};
};

struct TypeBehavior {
  // P(feasible-labelled task is declared infeasible).
  double p_over = 0.0;
  // P(infeasible-labelled task is answered).
  double p_conserv = 0.0;
  ConfusionSpec confusion;
};

struct SubjectProfile {
  std::array<TypeBehavior, kNumTypes> types{};
  std::uint64_t seed = 0;
  // P(a classification response carries no verdict block at all).
  double p_garbled = 0.0;

  TypeBehavior& operator[](SelfKnowledgeType t) { return types[index_of(t)]; }
  const TypeBehavior& operator[](SelfKnowledgeType t) const { return types[index_of(t)]; }

  // Throws ConfigError on probabilities outside [0, 1] or a confusion
  // distribution that does not sum to 1 within 1e-9.
  void validate() const;

  // Never overconfident, never conservative, never confused.
  static SubjectProfile echo(std::uint64_t seed = 0);
  static SubjectProfile uniform(double p_over, double p_conserv, std::uint64_t seed = 0);

  // {"seed": 7, "p_garbled": 0, "default": {...}, "types": {"<slug>": {...}}}
  // where each behaviour is {"p_over", "p_conserv", "confusion": {"self" | <reason slug>: p}}.
  static SubjectProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// The scripted subject's verdict on a task. Depends only on
// (profile, task id, label), never on call order.
Verdict scripted_verdict(const SubjectProfile& profile, std::string_view task_id,
                         const FeasibilityLabel& label);

// scripted_verdict wrapped as an outcome; raw_response is the text the
// scripted provider would send back.
ClassificationOutcome scripted_complete(const SubjectProfile& profile, const TaskRecord& task);

// Response text whose verdict block parses back to `verdict`.
std::string format_verdict_response(const Verdict& verdict);

// Deterministic stand-in for a generated task.
std::string scripted_task_text(std::string_view task_id, const FeasibilityLabel& label);

class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(SubjectProfile profile, std::string id = "scripted");

  std::string id() const override { return id_; }
  std::string attempt(const CompletionRequest& request) override;

  // Failure injection, keyed by request id. `times < 0` means always.
  void fail_with_provider_error(const std::string& request_id, int times = -1);
  void fail_with_rate_limit(const std::string& request_id, int times = -1);
  void fail_with_auth_error(const std::string& request_id, int times = -1);
  // Generation requests for this id answer with the given text instead.
  void script_generation(const std::string& request_id, std::string text);

  int calls() const;

  const SubjectProfile& profile() const { return profile_; }

 private:
  enum class Injected { Provider, RateLimit, Auth };
  struct Injection {
    Injected what;
    int remaining;
  };

  SubjectProfile profile_;
  std::string id_;
  mutable std::mutex mu_;
  std::map<std::string, Injection> injections_;
  std::map<std::string, std::string> scripted_text_;
  int calls_ = 0;
};

}  // namespace skeval
