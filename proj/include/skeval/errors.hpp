#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skeval {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: unknown provider, malformed template, invalid profile.
// The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Provider failures. `request_id` is the id the failing request carried.
class ProviderFailure : public Error {
 public:
  ProviderFailure(const std::string& what, std::string request_id)
      : Error(what), request_id_(std::move(request_id)) {}
  const std::string& request_id() const { return request_id_; }
  virtual const char* kind() const = 0;

 private:
  std::string request_id_;
};

class AuthError : public ProviderFailure {
 public:
  using ProviderFailure::ProviderFailure;
  const char* kind() const override { return "auth_error"; }
};

class RateLimitExhausted : public ProviderFailure {
 public:
  using ProviderFailure::ProviderFailure;
  const char* kind() const override { return "rate_limit_exhausted"; }
};

class TransportError : public ProviderFailure {
 public:
  using ProviderFailure::ProviderFailure;
  const char* kind() const override { return "transport_error"; }
};

class ProviderError : public ProviderFailure {
 public:
  using ProviderFailure::ProviderFailure;
  const char* kind() const override { return "provider_error"; }
};

// Not enough Valid tasks to fill a sampling quota.
class InsufficientTasks : public Error {
 public:
  InsufficientTasks(const std::string& what, std::string type_slug)
      : Error(what), type_slug_(std::move(type_slug)) {}
  const std::string& type_slug() const { return type_slug_; }

 private:
  std::string type_slug_;
};

// Run directory problems: sealed run, corrupt line, dangling reference.
class StoreError : public Error {
 public:
  using Error::Error;
};

class CorruptLine : public StoreError {
 public:
  CorruptLine(const std::string& file, std::size_t line, const std::string& detail)
      : StoreError(file + ":" + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public StoreError {
 public:
  using StoreError::StoreError;
};

}  // namespace skeval
