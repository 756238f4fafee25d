#include "odmds/corpus.hpp"

#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

using ordered_json = nlohmann::ordered_json;

Corpus::Corpus(std::vector<Document> documents, TokenizerConfig tokenizer)
    : documents_(std::move(documents)), tokenizer_(tokenizer) {
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    Document& doc = documents_[i];
    if (doc.doc_id.empty()) throw DataError("document with empty doc_id");
    if (doc.text.empty()) throw DataError("document \"" + doc.doc_id + "\" has empty text");
    if (!by_id_.emplace(doc.doc_id, i).second) {
      throw DataError("duplicate doc_id \"" + doc.doc_id + "\"");
    }
    if (doc.token_count <= 0) doc.token_count = count_tokens(doc.text, tokenizer_);
  }
}

const Document* Corpus::find(const std::string& doc_id) const {
  auto it = by_id_.find(doc_id);
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const Document& Corpus::at_id(const std::string& doc_id) const {
  const Document* doc = find(doc_id);
  if (!doc) throw DataError("unknown doc_id \"" + doc_id + "\"");
  return *doc;
}

std::vector<Chunk> chunk_text(const std::string& text, std::int64_t chunk_budget,
                              std::int64_t overlap, const TokenizerConfig& cfg,
                              const std::string& parent_doc_id) {
  if (chunk_budget < 1) throw std::invalid_argument("chunk_text: chunk_budget must be >= 1");
  if (overlap < 0 || overlap >= chunk_budget) {
    throw std::invalid_argument("chunk_text: overlap must satisfy 0 <= overlap < chunk_budget");
  }
  auto spans = tokenize_spans(text, cfg);
  std::vector<Chunk> chunks;
  const std::size_t n = spans.size();
  if (n == 0) return chunks;
  const std::size_t budget = static_cast<std::size_t>(chunk_budget);
  const std::size_t stride = static_cast<std::size_t>(chunk_budget - overlap);
  for (std::size_t start = 0;; start += stride) {
    std::size_t end = std::min(start + budget, n);
    Chunk c;
    c.parent_doc_id = parent_doc_id;
    c.ordinal = chunks.size();
    c.token_begin = start;
    c.token_end = end;
    c.text = text.substr(spans[start].begin, spans[end - 1].end - spans[start].begin);
    chunks.push_back(std::move(c));
    if (end == n) break;
  }
  return chunks;
}

Corpus load_corpus(const std::string& path, const TokenizerConfig& tokenizer) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> first_line;
  for (const auto& [line_no, obj] : read_jsonl(path)) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object() || !obj.contains("doc_id") || !obj["doc_id"].is_string() ||
        !obj.contains("text") || !obj["text"].is_string()) {
      throw DataError(where + ": expected object with string fields doc_id and text");
    }
    Document doc;
    doc.doc_id = obj["doc_id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (obj.contains("title") && !obj["title"].is_null()) {
      if (!obj["title"].is_string()) throw DataError(where + ": title must be a string or null");
      doc.title = obj["title"].get<std::string>();
    }
    if (doc.doc_id.empty()) throw DataError(where + ": empty doc_id");
    if (doc.text.empty()) throw DataError(where + ": document \"" + doc.doc_id + "\" has empty text");
    auto [it, inserted] = first_line.emplace(doc.doc_id, line_no);
    if (!inserted) {
      throw DataError(where + ": duplicate doc_id \"" + doc.doc_id + "\" (first seen at line " +
                      std::to_string(it->second) + ")");
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), tokenizer);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const Document& doc : corpus.documents()) {
    ordered_json obj;
    obj["doc_id"] = doc.doc_id;
    if (doc.title) {
      obj["title"] = *doc.title;
    } else {
      obj["title"] = nullptr;
    }
    obj["text"] = doc.text;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  write_file_atomic(path, corpus_to_jsonl(corpus));
}

std::vector<QueryInstance> load_queries(const std::string& path) {
  std::vector<QueryInstance> out;
  std::unordered_set<std::string> seen_ids;
  for (const auto& [line_no, obj] : read_jsonl(path)) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object() || !obj.contains("query_id") || !obj["query_id"].is_string() ||
        !obj.contains("query") || !obj["query"].is_string() ||
        !obj.contains("gold_doc_ids") || !obj["gold_doc_ids"].is_array() ||
        !obj.contains("references") || !obj["references"].is_array()) {
      throw DataError(where +
                      ": expected object with query_id, query, gold_doc_ids, references");
    }
    QueryInstance q;
    q.query_id = obj["query_id"].get<std::string>();
    q.query = obj["query"].get<std::string>();
    if (q.query_id.empty()) throw DataError(where + ": empty query_id");
    if (!seen_ids.insert(q.query_id).second) {
      throw DataError(where + ": duplicate query_id \"" + q.query_id + "\"");
    }
    std::unordered_set<std::string> gold_seen;
    for (const auto& g : obj["gold_doc_ids"]) {
      if (!g.is_string()) throw DataError(where + ": gold_doc_ids must be strings");
      std::string id = g.get<std::string>();
      if (!gold_seen.insert(id).second) {
        throw DataError(where + ": duplicate gold doc_id \"" + id + "\" for query \"" +
                        q.query_id + "\"");
      }
      q.gold_doc_ids.push_back(std::move(id));
    }
    if (q.gold_doc_ids.empty()) {
      throw DataError(where + ": query \"" + q.query_id + "\" has no gold documents");
    }
    for (const auto& r : obj["references"]) {
      if (!r.is_string()) throw DataError(where + ": references must be strings");
      q.references.push_back(r.get<std::string>());
    }
    if (q.references.empty()) {
      throw DataError(where + ": query \"" + q.query_id + "\" has no reference summaries");
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<QueryInstance> load_queries(const std::string& path, const Corpus& corpus) {
  auto queries = load_queries(path);
  for (const auto& q : queries) {
    for (const auto& gold : q.gold_doc_ids) {
      if (!corpus.find(gold)) {
        throw DataError("query \"" + q.query_id + "\" references unknown doc_id \"" + gold +
                        "\"");
      }
    }
  }
  return queries;
}

std::string queries_to_jsonl(const std::vector<QueryInstance>& queries) {
  std::string out;
  for (const QueryInstance& q : queries) {
    ordered_json obj;
    obj["query_id"] = q.query_id;
    obj["query"] = q.query;
    obj["gold_doc_ids"] = q.gold_doc_ids;
    obj["references"] = q.references;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_queries(const std::vector<QueryInstance>& queries, const std::string& path) {
  write_file_atomic(path, queries_to_jsonl(queries));
}

}  // namespace odmds
