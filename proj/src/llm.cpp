#include "odmds/llm.hpp"

#include <array>
#include <chrono>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "odmds/errors.hpp"
#include "http_common.hpp"

namespace odmds {

namespace {

void check_request(const LlmRequest& request) {
  if (request.user.empty()) throw std::invalid_argument("LlmRequest.user must be non-empty");
}

std::int64_t estimate_tokens(const LlmRequest& request) {
  TokenizerConfig ws;  // coarse whitespace estimate, good enough for tracing
  return count_tokens(request.system, ws) + count_tokens(request.user, ws);
}

}  // namespace

RemoteLlmClient::RemoteLlmClient(LlmClientConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw UsageError("remote LLM client needs a base_url");
}

LlmResponse RemoteLlmClient::complete(const LlmRequest& request) {
  check_request(request);
  auto parts = http::split_url(config_.base_url);
  const std::string path = parts.path + config_.completions_path;
  const std::string api_key = http::api_key_from_env(config_.api_key_env);

  nlohmann::json messages = nlohmann::json::array();
  if (!request.system.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user}});
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;

  const auto start = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) http::sleep_backoff(attempt - 1, config_.retry_base_ms);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned status " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProviderError("LLM endpoint returned status " + std::to_string(res->status) + ": " +
                          res->body);
    }
    nlohmann::json payload = nlohmann::json::parse(res->body, nullptr, false);
    if (payload.is_discarded() || !payload.contains("choices") || payload["choices"].empty()) {
      throw ProviderError("malformed completion response: " + res->body.substr(0, 200));
    }
    const auto& choice = payload["choices"][0];
    std::string text;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      text = choice["message"]["content"].get<std::string>();
    } else if (choice.contains("text") && choice["text"].is_string()) {
      text = choice["text"].get<std::string>();
    }
    if (text.empty()) throw ProviderError("LLM returned an empty completion");

    LlmResponse out;
    out.text = std::move(text);
    out.input_token_estimate = estimate_tokens(request);
    out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start)
                         .count();
    out.provider_meta = payload.value("model", config_.model);
    return out;
  }
  throw ProviderError("LLM request failed after " + std::to_string(config_.max_retries) +
                      " retries: " + last_error);
}

ScriptedLlmClient::ScriptedLlmClient(std::vector<std::string> replies)
    : replies_(replies.begin(), replies.end()) {}

LlmResponse ScriptedLlmClient::complete(const LlmRequest& request) {
  check_request(request);
  std::lock_guard<std::mutex> lock(mutex_);
  if (replies_.empty()) throw ProviderError("scripted LLM client ran out of replies");
  LlmResponse out;
  out.text = std::move(replies_.front());
  replies_.pop_front();
  out.input_token_estimate = estimate_tokens(request);
  out.provider_meta = "scripted";
  return out;
}

std::size_t ScriptedLlmClient::remaining() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return replies_.size();
}

ExtractiveLlmClient::ExtractiveLlmClient(TokenizerConfig cfg) : cfg_(cfg) {}

LlmResponse ExtractiveLlmClient::complete(const LlmRequest& request) {
  check_request(request);
  static const std::array<const char*, 7> kMarkers = {
      "STORY:",   "MEETING:",           "DOCUMENT:", "TEXT:",
      "SUMMARIES:", "PARTIAL SUMMARIES:", "QUESTIONS:"};
  std::size_t best_pos = std::string::npos;
  std::size_t begin = std::string::npos;
  for (const char* marker : kMarkers) {
    std::size_t pos = request.user.find(marker);
    if (pos != std::string::npos && (best_pos == std::string::npos || pos < best_pos)) {
      best_pos = pos;
      begin = pos + std::string(marker).size();
    }
  }
  std::string segment;
  if (begin == std::string::npos) {
    segment = request.user;
  } else {
    std::size_t end = request.user.find("QUESTION:", begin);
    segment = end == std::string::npos ? request.user.substr(begin)
                                       : request.user.substr(begin, end - begin);
  }
  LlmResponse out;
  out.text = truncate_to_budget(segment, request.max_output_tokens, cfg_);
  out.input_token_estimate = estimate_tokens(request);
  out.provider_meta = "extractive";
  return out;
}

RecordingLlmClient::RecordingLlmClient(LlmClient& inner) : inner_(inner) {}

LlmResponse RecordingLlmClient::complete(const LlmRequest& request) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    requests_.push_back(request);
  }
  return inner_.complete(request);
}

}  // namespace odmds
