#include "odmds/embedding.hpp"

#include <cmath>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "odmds/errors.hpp"
#include "http_common.hpp"

namespace odmds {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

EmbeddingVector hashing_embed(const std::vector<std::string>& tokens,
                              const EmbeddingProviderConfig& provider) {
  if (provider.dimension == 0) throw UsageError("hashing provider needs dimension >= 1");
  if (tokens.empty()) throw DataError("cannot embed empty token stream");
  EmbeddingVector v(provider.dimension, 0.0);
  const std::uint64_t seed_mix = splitmix64(provider.seed);
  for (const std::string& tok : tokens) {
    std::uint64_t h = splitmix64(fnv1a64(tok) ^ seed_mix);
    std::size_t idx = static_cast<std::size_t>(h % provider.dimension);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[idx] += sign;
  }
  l2_normalize(v);
  return v;
}

EmbeddingVector remote_embed(const std::string& text, const EmbeddingProviderConfig& provider) {
  auto parts = http::split_url(provider.endpoint);
  const std::string path = parts.path + "/embeddings";
  const std::string api_key = http::api_key_from_env(provider.api_key_env);

  nlohmann::json body;
  body["model"] = provider.model;
  body["input"] = nlohmann::json::array({text});

  std::string last_error;
  for (int attempt = 0; attempt <= provider.max_retries; ++attempt) {
    if (attempt > 0) http::sleep_backoff(attempt - 1, provider.retry_base_ms);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(provider.timeout_s, 0);
    client.set_read_timeout(provider.timeout_s, 0);
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
      throw ProviderError("embedding endpoint returned status " + std::to_string(res->status) +
                          ": " + res->body);
    }
    nlohmann::json payload = nlohmann::json::parse(res->body, nullptr, false);
    if (payload.is_discarded() || !payload.contains("data") || !payload["data"].is_array() ||
        payload["data"].empty() || !payload["data"][0].contains("embedding")) {
      throw ProviderError("malformed embedding response: " + res->body.substr(0, 200));
    }
    EmbeddingVector v;
    for (const auto& x : payload["data"][0]["embedding"]) v.push_back(x.get<double>());
    if (provider.dimension != 0 && v.size() != provider.dimension) {
      throw ProviderError("embedding dimension mismatch: expected " +
                          std::to_string(provider.dimension) + ", got " +
                          std::to_string(v.size()));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw ProviderError("embedding response contains non-finite value");
    }
    l2_normalize(v);
    return v;
  }
  throw ProviderError("embedding request failed after " + std::to_string(provider.max_retries) +
                      " retries: " + last_error);
}

}  // namespace

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void l2_normalize(EmbeddingVector& v) {
  double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DataError("cannot L2-normalize vector with zero or non-finite norm");
  }
  for (double& x : v) x /= n;
}

std::string EmbeddingProviderConfig::tag() const {
  std::string s;
  if (kind == EmbeddingKind::hashing) {
    s = "hashing:dim=" + std::to_string(dimension) + ":seed=" + std::to_string(seed);
  } else {
    s = "remote:" + (model.empty() ? std::string("?") : model);
  }
  s += long_doc_strategy == LongDocStrategy::truncate ? ":truncate" : ":weighted_average";
  return s;
}

EmbeddingVector embed_text(const std::string& text, const EmbeddingProviderConfig& provider,
                           const TokenizerConfig& cfg) {
  auto tokens = tokenize(text, cfg);
  if (tokens.size() > provider.max_input_tokens) {
    throw std::invalid_argument("embed_text: input exceeds max_input_tokens (" +
                                std::to_string(tokens.size()) + " > " +
                                std::to_string(provider.max_input_tokens) +
                                "); use embed_long_document");
  }
  if (provider.kind == EmbeddingKind::hashing) return hashing_embed(tokens, provider);
  return remote_embed(text, provider);
}

EmbeddingVector embed_long_document(const Document& doc, const EmbeddingProviderConfig& provider,
                                    const TokenizerConfig& cfg) {
  const std::int64_t limit = static_cast<std::int64_t>(provider.max_input_tokens);
  const std::int64_t n = doc.token_count > 0 ? doc.token_count : count_tokens(doc.text, cfg);
  if (n <= limit) return embed_text(doc.text, provider, cfg);
  if (provider.long_doc_strategy == LongDocStrategy::truncate) {
    return embed_text(truncate_to_budget(doc.text, limit, cfg), provider, cfg);
  }
  auto chunks = chunk_text(doc.text, limit, 0, cfg, doc.doc_id);
  EmbeddingVector acc;
  for (const Chunk& chunk : chunks) {
    EmbeddingVector v = embed_text(chunk.text, provider, cfg);
    double weight = static_cast<double>(chunk.token_end - chunk.token_begin);
    if (acc.empty()) acc.assign(v.size(), 0.0);
    if (acc.size() != v.size()) throw ProviderError("embedding dimension varies across chunks");
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += weight * v[i];
  }
  l2_normalize(acc);
  return acc;
}

}  // namespace odmds
