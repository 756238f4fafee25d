#include "odmds/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

namespace {

double bm25_term_score(double tf, double df, double n_docs, double dl, double avgdl, double k1,
                       double b) {
  if (tf <= 0.0) return 0.0;
  double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
  return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
}

void check_bm25_params(double k1, double b) {
  if (!(k1 > 0.0)) throw std::invalid_argument("bm25: k1 must be > 0");
  if (b < 0.0 || b > 1.0) throw std::invalid_argument("bm25: b must be in [0, 1]");
}

}  // namespace

std::int64_t SparseIndex::doc_freq(const std::string& term) const {
  auto it = postings.find(term);
  return it == postings.end() ? 0 : static_cast<std::int64_t>(it->second.size());
}

SparseIndex build_sparse_index(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("cannot build sparse index over empty corpus");
  SparseIndex index;
  index.tokenizer = corpus.tokenizer();
  index.doc_ids.reserve(corpus.size());
  index.doc_lengths.reserve(corpus.size());
  std::int64_t total_len = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Document& doc = corpus.documents()[i];
    auto tokens = tokenize(doc.text, corpus.tokenizer());
    if (tokens.empty()) {
      throw DataError("document \"" + doc.doc_id +
                      "\" produces an empty token stream under the corpus tokenizer");
    }
    index.doc_ids.push_back(doc.doc_id);
    index.doc_index_by_id.emplace(doc.doc_id, i);
    index.doc_lengths.push_back(static_cast<std::int64_t>(tokens.size()));
    total_len += static_cast<std::int64_t>(tokens.size());
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      index.postings[term].emplace_back(static_cast<std::uint32_t>(i), count);
    }
  }
  index.avg_doc_length = static_cast<double>(total_len) / static_cast<double>(corpus.size());
  return index;
}

double bm25_score(const std::vector<std::string>& query_terms, std::size_t doc_index,
                  const SparseIndex& index, double k1, double b) {
  check_bm25_params(k1, b);
  if (doc_index >= index.doc_count()) throw std::invalid_argument("bm25_score: bad doc_index");
  const double n_docs = static_cast<double>(index.doc_count());
  const double dl = static_cast<double>(index.doc_lengths[doc_index]);
  double score = 0.0;
  for (const std::string& term : query_terms) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;  // df = 0 and tf = 0: contributes 0
    const auto& plist = it->second;
    auto pit = std::lower_bound(plist.begin(), plist.end(),
                                std::make_pair(static_cast<std::uint32_t>(doc_index), 0u),
                                [](const auto& a, const auto& b2) { return a.first < b2.first; });
    double tf = 0.0;
    if (pit != plist.end() && pit->first == doc_index) tf = static_cast<double>(pit->second);
    score += bm25_term_score(tf, static_cast<double>(plist.size()), n_docs, dl,
                             index.avg_doc_length, k1, b);
  }
  return score;
}

std::vector<RankedDoc> rank_top_k(std::vector<std::pair<std::string, double>> scored, int k) {
  if (k < 1) throw std::invalid_argument("rank_top_k: k must be >= 1");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
  std::vector<RankedDoc> out;
  out.reserve(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out.push_back(RankedDoc{scored[i].first, scored[i].second, static_cast<int>(i + 1)});
  }
  return out;
}

std::vector<RankedDoc> search_sparse(const SparseIndex& index, const std::string& query, int k,
                                     double k1, double b) {
  check_bm25_params(k1, b);
  if (k < 1) throw std::invalid_argument("search_sparse: k must be >= 1");
  auto tokens = tokenize(query, index.tokenizer);
  std::map<std::string, double> query_tf;
  for (const auto& t : tokens) query_tf[t] += 1.0;

  const double n_docs = static_cast<double>(index.doc_count());
  std::vector<double> scores(index.doc_count(), 0.0);
  for (const auto& [term, qtf] : query_tf) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double df = static_cast<double>(it->second.size());
    for (const auto& [doc_idx, tf] : it->second) {
      scores[doc_idx] += qtf * bm25_term_score(static_cast<double>(tf), df, n_docs,
                                               static_cast<double>(index.doc_lengths[doc_idx]),
                                               index.avg_doc_length, k1, b);
    }
  }

  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > 0.0) scored.emplace_back(index.doc_ids[i], scores[i]);
  }
  return rank_top_k(std::move(scored), k);
}

void save_sparse_index(const SparseIndex& index, const std::string& path) {
  nlohmann::json obj;
  obj["format"] = "odmds.sparse_index";
  obj["version"] = 1;
  obj["tokenizer"] = index.tokenizer.fingerprint();
  obj["doc_ids"] = index.doc_ids;
  obj["doc_lengths"] = index.doc_lengths;
  obj["avg_doc_length"] = index.avg_doc_length;
  nlohmann::json postings = nlohmann::json::object();
  for (const auto& [term, plist] : index.postings) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [doc_idx, tf] : plist) rows.push_back({doc_idx, tf});
    postings[term] = std::move(rows);
  }
  obj["postings"] = std::move(postings);
  write_file_atomic(path, obj.dump() + "\n");
}

SparseIndex load_sparse_index(const std::string& path, const TokenizerConfig& expected) {
  nlohmann::json obj = nlohmann::json::parse(read_file(path), nullptr, false);
  if (obj.is_discarded() || obj.value("format", "") != "odmds.sparse_index") {
    throw DataError(path + ": not a sparse index file");
  }
  SparseIndex index;
  index.tokenizer = tokenizer_from_fingerprint(obj.at("tokenizer").get<std::string>());
  if (!(index.tokenizer == expected)) {
    throw DataError(path + ": index tokenizer (" + index.tokenizer.fingerprint() +
                    ") does not match configured tokenizer (" + expected.fingerprint() + ")");
  }
  index.doc_ids = obj.at("doc_ids").get<std::vector<std::string>>();
  index.doc_lengths = obj.at("doc_lengths").get<std::vector<std::int64_t>>();
  index.avg_doc_length = obj.at("avg_doc_length").get<double>();
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) index.doc_index_by_id[index.doc_ids[i]] = i;
  for (const auto& [term, rows] : obj.at("postings").items()) {
    auto& plist = index.postings[term];
    for (const auto& row : rows) {
      plist.emplace_back(row.at(0).get<std::uint32_t>(), row.at(1).get<std::uint32_t>());
    }
  }
  return index;
}

DenseIndex build_dense_index(const Corpus& corpus, const EmbeddingProviderConfig& provider) {
  if (corpus.empty()) throw DataError("cannot build dense index over empty corpus");
  DenseIndex index;
  index.provider_tag = provider.tag();
  index.tokenizer = corpus.tokenizer();
  index.doc_ids.reserve(corpus.size());
  index.vectors.resize(corpus.size());

  const std::size_t n = corpus.size();
  int workers = std::max(1, provider.max_concurrency);
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));

  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      index.vectors[i] = embed_long_document(corpus.documents()[i], provider, corpus.tokenizer());
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            index.vectors[i] =
                embed_long_document(corpus.documents()[i], provider, corpus.tokenizer());
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < n; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);  // first failing doc in corpus order
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Document& doc = corpus.documents()[i];
    index.doc_ids.push_back(doc.doc_id);
    index.doc_index_by_id.emplace(doc.doc_id, i);
    if (index.dimension == 0) index.dimension = index.vectors[i].size();
    if (index.vectors[i].size() != index.dimension) {
      throw ProviderError("embedding dimension varies across documents");
    }
  }
  return index;
}

std::vector<RankedDoc> search_dense(const DenseIndex& index, const std::string& query,
                                    const EmbeddingProviderConfig& provider, int k) {
  if (k < 1) throw std::invalid_argument("search_dense: k must be >= 1");
  if (provider.kind == EmbeddingKind::hashing && provider.dimension != index.dimension) {
    throw UsageError("provider dimension " + std::to_string(provider.dimension) +
                     " does not match index dimension " + std::to_string(index.dimension));
  }
  std::string q = query;
  if (static_cast<std::size_t>(count_tokens(q, index.tokenizer)) > provider.max_input_tokens) {
    q = truncate_to_budget(q, static_cast<std::int64_t>(provider.max_input_tokens),
                           index.tokenizer);
  }
  EmbeddingVector qv = embed_text(q, provider, index.tokenizer);
  if (qv.size() != index.dimension) {
    throw ProviderError("query embedding dimension " + std::to_string(qv.size()) +
                        " does not match index dimension " + std::to_string(index.dimension));
  }
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(index.doc_ids.size());
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) {
    scored.emplace_back(index.doc_ids[i], dot(qv, index.vectors[i]));
  }
  return rank_top_k(std::move(scored), k);
}

void save_dense_index(const DenseIndex& index, const std::string& path) {
  nlohmann::json obj;
  obj["format"] = "odmds.dense_index";
  obj["version"] = 1;
  obj["dimension"] = index.dimension;
  obj["provider_tag"] = index.provider_tag;
  obj["tokenizer"] = index.tokenizer.fingerprint();
  obj["count"] = index.doc_ids.size();
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) {
    records.push_back({{"doc_id", index.doc_ids[i]}, {"values", index.vectors[i]}});
  }
  obj["vectors"] = std::move(records);
  write_file_atomic(path, obj.dump() + "\n");
}

DenseIndex load_dense_index(const std::string& path, const TokenizerConfig& expected) {
  nlohmann::json obj = nlohmann::json::parse(read_file(path), nullptr, false);
  if (obj.is_discarded() || obj.value("format", "") != "odmds.dense_index") {
    throw DataError(path + ": not a dense index file");
  }
  DenseIndex index;
  index.dimension = obj.at("dimension").get<std::size_t>();
  index.provider_tag = obj.at("provider_tag").get<std::string>();
  index.tokenizer = tokenizer_from_fingerprint(obj.at("tokenizer").get<std::string>());
  if (!(index.tokenizer == expected)) {
    throw DataError(path + ": index tokenizer (" + index.tokenizer.fingerprint() +
                    ") does not match configured tokenizer (" + expected.fingerprint() + ")");
  }
  for (const auto& record : obj.at("vectors")) {
    std::string doc_id = record.at("doc_id").get<std::string>();
    EmbeddingVector v = record.at("values").get<EmbeddingVector>();
    if (v.size() != index.dimension) {
      throw DataError(path + ": vector for \"" + doc_id + "\" has wrong dimension");
    }
    index.doc_index_by_id.emplace(doc_id, index.doc_ids.size());
    index.doc_ids.push_back(std::move(doc_id));
    index.vectors.push_back(std::move(v));
  }
  if (index.doc_ids.size() != obj.at("count").get<std::size_t>()) {
    throw DataError(path + ": record count does not match header");
  }
  return index;
}

std::string run_to_trec(const RetrievalRun& run) {
  std::string out;
  char buf[64];
  for (const auto& [query_id, docs] : run.results) {
    for (const RankedDoc& d : docs) {
      std::snprintf(buf, sizeof(buf), "%.6f", d.score);
      out += query_id;
      out += " Q0 ";
      out += d.doc_id;
      out += ' ';
      out += std::to_string(d.rank);
      out += ' ';
      out += buf;
      out += ' ';
      out += run.retriever_tag;
      out += '\n';
    }
  }
  return out;
}

void write_run(const RetrievalRun& run, const std::string& path) {
  write_file_atomic(path, run_to_trec(run));
}

RetrievalRun load_run(const std::string& path) {
  std::istringstream in(read_file(path));
  RetrievalRun run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string query_id, q0, doc_id, tag;
    int rank = 0;
    double score = 0.0;
    if (!(fields >> query_id >> q0 >> doc_id >> rank >> score >> tag)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed run line");
    }
    run.results[query_id].push_back(RankedDoc{doc_id, score, rank});
    if (run.retriever_tag.empty()) run.retriever_tag = tag;
  }
  for (auto& [query_id, docs] : run.results) {
    std::sort(docs.begin(), docs.end(),
              [](const RankedDoc& a, const RankedDoc& b) { return a.rank < b.rank; });
    std::unordered_map<std::string, int> seen;
    for (const RankedDoc& d : docs) {
      if (++seen[d.doc_id] > 1) {
        throw DataError(path + ": duplicate doc \"" + d.doc_id + "\" for query \"" + query_id +
                        "\"");
      }
    }
    run.k = std::max(run.k, static_cast<int>(docs.size()));
  }
  return run;
}

}  // namespace odmds
