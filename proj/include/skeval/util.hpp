#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace skeval {

std::string sha256_hex(std::string_view data);
std::string read_file(const std::filesystem::path& path);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// 64-bit FNV-1a; stable across platforms, used to derive per-task seeds.
std::uint64_t fnv1a64(std::string_view data);

// Returns the current time as an ISO-8601 UTC string. Swappable so that
// simulated runs can be replayed byte for byte.
using Clock = std::function<std::string()>;
Clock system_clock();
Clock fixed_clock(std::string timestamp);

// Small deterministic generator. The standard distributions are not
// specified bit-for-bit across library implementations, so sampling and the
// scripted subject draw through this instead.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

}  // namespace skeval
