#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "odmds/tokenizer.hpp"

namespace odmds {

struct LlmRequest {
  std::string system;
  std::string user;
  int max_output_tokens = 512;
  double temperature = 0.0;
  std::string tag;  // free-form trace label
};

struct LlmResponse {
  std::string text;
  std::int64_t input_token_estimate = 0;
  double latency_ms = 0.0;
  std::string provider_meta;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmResponse complete(const LlmRequest& request) = 0;
};

struct LlmClientConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  std::string completions_path = "/chat/completions";
  int max_retries = 3;
  int retry_base_ms = 1000;
  int timeout_s = 300;
};

// Chat-completions-style HTTP client. Retries transport errors and 5xx with
// exponential backoff; 4xx and empty completions fail immediately.
class RemoteLlmClient : public LlmClient {
 public:
  explicit RemoteLlmClient(LlmClientConfig config);
  LlmResponse complete(const LlmRequest& request) override;

 private:
  LlmClientConfig config_;
};

// Test double: returns canned responses in order, throws when exhausted.
class ScriptedLlmClient : public LlmClient {
 public:
  explicit ScriptedLlmClient(std::vector<std::string> replies);
  LlmResponse complete(const LlmRequest& request) override;
  std::size_t remaining() const;

 private:
  std::deque<std::string> replies_;
  mutable std::mutex mutex_;
};

// Test double: extracts the first max_output_tokens tokens of the text
// between the document marker (STORY:/MEETING:/DOCUMENT:/TEXT:/...) and the
// following "QUESTION:".
class ExtractiveLlmClient : public LlmClient {
 public:
  explicit ExtractiveLlmClient(TokenizerConfig cfg);
  LlmResponse complete(const LlmRequest& request) override;

 private:
  TokenizerConfig cfg_;
};

// Wraps another client and logs every request it forwards.
class RecordingLlmClient : public LlmClient {
 public:
  explicit RecordingLlmClient(LlmClient& inner);
  LlmResponse complete(const LlmRequest& request) override;
  const std::vector<LlmRequest>& requests() const { return requests_; }

 private:
  LlmClient& inner_;
  std::vector<LlmRequest> requests_;
  std::mutex mutex_;
};

}  // namespace odmds
