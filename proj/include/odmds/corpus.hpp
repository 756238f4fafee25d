#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "odmds/tokenizer.hpp"

namespace odmds {

struct Document {
  std::string doc_id;
  std::optional<std::string> title;
  std::string text;
  std::int64_t token_count = 0;  // under the owning corpus's tokenizer
};

// Immutable after construction; iteration order is insertion (= on-disk)
// order, which downstream components rely on for deterministic tie-breaking.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, TokenizerConfig tokenizer);

  const std::vector<Document>& documents() const { return documents_; }
  const TokenizerConfig& tokenizer() const { return tokenizer_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const Document* find(const std::string& doc_id) const;
  const Document& at_id(const std::string& doc_id) const;  // DataError if absent

 private:
  std::vector<Document> documents_;
  TokenizerConfig tokenizer_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct QueryInstance {
  std::string query_id;
  std::string query;
  std::vector<std::string> gold_doc_ids;  // unique; file order preserved
  std::vector<std::string> references;    // 1..n reference summaries
};

struct Chunk {
  std::string parent_doc_id;
  std::size_t ordinal = 0;  // 0-based
  std::string text;
  std::size_t token_begin = 0;  // [token_begin, token_end) into the parent
  std::size_t token_end = 0;
};

// Fixed-stride chunking over tokens: stride = chunk_budget - overlap, every
// chunk at most chunk_budget tokens, consecutive chunks share exactly
// `overlap` tokens, last chunk may be shorter.
std::vector<Chunk> chunk_text(const std::string& text, std::int64_t chunk_budget,
                              std::int64_t overlap, const TokenizerConfig& cfg,
                              const std::string& parent_doc_id = "");

Corpus load_corpus(const std::string& path, const TokenizerConfig& tokenizer);
std::string corpus_to_jsonl(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

std::vector<QueryInstance> load_queries(const std::string& path);
std::vector<QueryInstance> load_queries(const std::string& path, const Corpus& corpus);
std::string queries_to_jsonl(const std::vector<QueryInstance>& queries);
void write_queries(const std::vector<QueryInstance>& queries, const std::string& path);

}  // namespace odmds
