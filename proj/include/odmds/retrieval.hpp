#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "odmds/corpus.hpp"
#include "odmds/embedding.hpp"

namespace odmds {

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// Inverted index with the collection statistics BM25 needs. Immutable after
// build; postings lists are sorted by doc_index ascending.
struct SparseIndex {
  TokenizerConfig tokenizer;
  std::vector<std::string> doc_ids;       // doc_index -> doc_id
  std::vector<std::int64_t> doc_lengths;  // doc_index -> token count
  double avg_doc_length = 0.0;
  std::map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings;
  std::unordered_map<std::string, std::size_t> doc_index_by_id;

  std::size_t doc_count() const { return doc_ids.size(); }
  std::int64_t doc_freq(const std::string& term) const;
};

SparseIndex build_sparse_index(const Corpus& corpus);

// Okapi BM25 with Lucene-style non-negative IDF:
//   IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
//   score  = sum over query tokens of IDF * tf*(k1+1) / (tf + k1*(1-b+b*dl/avgdl))
// Query tokens are a multiset; repeated tokens contribute once per occurrence.
double bm25_score(const std::vector<std::string>& query_terms, std::size_t doc_index,
                  const SparseIndex& index, double k1 = 1.2, double b = 0.75);

// Top-k by BM25, descending, ties by doc_id ascending. Documents scoring 0
// (no term overlap) are excluded.
std::vector<RankedDoc> search_sparse(const SparseIndex& index, const std::string& query, int k,
                                     double k1 = 1.2, double b = 0.75);

void save_sparse_index(const SparseIndex& index, const std::string& path);
SparseIndex load_sparse_index(const std::string& path, const TokenizerConfig& expected);

struct DenseIndex {
  std::size_t dimension = 0;
  std::string provider_tag;
  TokenizerConfig tokenizer;
  std::vector<std::string> doc_ids;  // corpus order
  std::vector<EmbeddingVector> vectors;
  std::unordered_map<std::string, std::size_t> doc_index_by_id;
};

// One L2-normalized vector per document via embed_long_document. Documents
// may be embedded in parallel (provider.max_concurrency) but the index is
// assembled in corpus order, so the result is identical either way. Any
// embedding failure aborts the whole build.
DenseIndex build_dense_index(const Corpus& corpus, const EmbeddingProviderConfig& provider);

// Top-k by cosine similarity (dot product of normalized vectors), descending,
// ties by doc_id ascending.
std::vector<RankedDoc> search_dense(const DenseIndex& index, const std::string& query,
                                    const EmbeddingProviderConfig& provider, int k);

void save_dense_index(const DenseIndex& index, const std::string& path);
DenseIndex load_dense_index(const std::string& path, const TokenizerConfig& expected);

struct RetrievalRun {
  std::string retriever_tag;
  int k = 0;
  std::map<std::string, std::vector<RankedDoc>> results;  // query_id -> ranked list
};

// TREC run format: `query_id Q0 doc_id rank score tag`, rank 1-based, score
// printed with 6 decimal digits.
std::string run_to_trec(const RetrievalRun& run);
void write_run(const RetrievalRun& run, const std::string& path);
RetrievalRun load_run(const std::string& path);

// Sorts (doc_id, score) pairs by score descending then doc_id ascending and
// keeps the top k with 1-based ranks.
std::vector<RankedDoc> rank_top_k(std::vector<std::pair<std::string, double>> scored, int k);

}  // namespace odmds
