#pragma once

// Internal helpers shared by the remote embedding and LLM clients.

#include <chrono>
#include <random>
#include <string>
#include <thread>

#include "odmds/errors.hpp"

namespace odmds::http {

struct UrlParts {
  std::string origin;  // scheme://host[:port], what httplib::Client takes
  std::string path;    // leading path prefix, possibly empty
};

inline UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw UsageError("endpoint URL must start with http:// or https://: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  if (path == "/") path.clear();
  return {url.substr(0, path_start), path};
}

// Exponential backoff with jitter: base * 2^attempt, scaled by U[0.5, 1.0).
inline std::chrono::milliseconds backoff_delay(int attempt, int base_ms) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  double ms = static_cast<double>(base_ms) * static_cast<double>(1 << attempt) * jitter(rng);
  return std::chrono::milliseconds(static_cast<long>(ms));
}

inline void sleep_backoff(int attempt, int base_ms) {
  std::this_thread::sleep_for(backoff_delay(attempt, base_ms));
}

inline std::string api_key_from_env(const std::string& env_name) {
  if (env_name.empty()) return "";
  const char* v = std::getenv(env_name.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace odmds::http
