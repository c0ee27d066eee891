#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <fmt/format.h>

#include "skeval/provider.hpp"

namespace skeval {

HttpProviderConfig HttpProviderConfig::from_json(const std::string& name, const nlohmann::json& j) {
  HttpProviderConfig c;
  c.name = name;
  try {
    c.endpoint = j.at("endpoint").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.api_key_env = j.at("api_key_env").get<std::string>();
    c.auth_header = j.value("auth_header", c.auth_header);
    c.auth_scheme = j.value("auth_scheme", c.auth_scheme);
    c.timeout = std::chrono::seconds(j.value("timeout_s", 120));
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("provider '" + name + "': " + e.what());
  }
  return c;
}

nlohmann::json chat_request_body(const CompletionRequest& request) {
  return {
      {"model", request.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt_text}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
}

std::string chat_response_text(const nlohmann::json& body, const std::string& request_id) {
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some providers return a list of content parts.
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(request_id + ": unexpected response shape: " + e.what(), request_id);
  }
}

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
  if (config_.api_key_env.empty()) {
    throw ConfigError("provider '" + config_.name + "' declares no api_key_env");
  }
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("credential variable " + config_.api_key_env + " is not set for provider '" +
                        config_.name + "'",
                    "");
  }
  api_key_ = key;

  // Split "scheme://host[:port]/path".
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("provider '" + config_.name + "': endpoint must be an absolute URL");
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  base_url_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::attempt(const CompletionRequest& request) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  headers.emplace(config_.auth_header,
                  config_.auth_scheme.empty() ? api_key_ : config_.auth_scheme + " " + api_key_);

  const auto res =
      client.Post(path_, headers, chat_request_body(request).dump(), "application/json");
  if (!res) {
    throw RetryableFailure(RetryableFailure::Cause::Transport,
                           "transport failure: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError(fmt::format("{}: HTTP {} from {}", request.request_id, status, config_.name),
                    request.request_id);
  }
  if (status == 429) {
    throw RetryableFailure(RetryableFailure::Cause::RateLimited, "HTTP 429");
  }
  if (status == 408 || status >= 500) {
    throw RetryableFailure(RetryableFailure::Cause::Server, fmt::format("HTTP {}", status));
  }
  if (status != 200) {
    throw ProviderError(fmt::format("{}: HTTP {} from {}: {}", request.request_id, status,
                                    config_.name, res->body.substr(0, 200)),
                        request.request_id);
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(request.request_id + ": response is not JSON: " + e.what(),
                        request.request_id);
  }
  return chat_response_text(body, request.request_id);
}

}  // namespace skeval
