#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odmds/corpus.hpp"
#include "odmds/tokenizer.hpp"

namespace odmds {

using EmbeddingVector = std::vector<double>;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);
void l2_normalize(EmbeddingVector& v);  // DataError on zero or non-finite norm

enum class EmbeddingKind { hashing, remote };
enum class LongDocStrategy { truncate, weighted_average };

struct EmbeddingProviderConfig {
  EmbeddingKind kind = EmbeddingKind::hashing;

  // hashing: deterministic seeded feature hashing, one bucket per token
  std::size_t dimension = 64;
  std::uint64_t seed = 0;

  // remote: HTTP JSON embeddings API, POST {"model":..., "input":[...]}
  std::string endpoint;
  std::string model;
  std::string api_key_env = "EMBEDDING_API_KEY";
  int max_retries = 3;
  int retry_base_ms = 1000;
  int timeout_s = 120;

  std::size_t max_input_tokens = 8191;
  LongDocStrategy long_doc_strategy = LongDocStrategy::truncate;
  int max_concurrency = 4;

  std::string tag() const;  // provider kind + long-doc strategy, stored in indexes
};

// Embeds a text that already fits the provider limit; longer inputs must go
// through embed_long_document. Result is L2-normalized.
EmbeddingVector embed_text(const std::string& text, const EmbeddingProviderConfig& provider,
                           const TokenizerConfig& cfg);

// Applies the provider's long-document strategy: truncate to the input limit,
// or embed non-overlapping limit-sized chunks and average them weighted by
// chunk token counts, then re-normalize.
EmbeddingVector embed_long_document(const Document& doc, const EmbeddingProviderConfig& provider,
                                    const TokenizerConfig& cfg);

}  // namespace odmds
