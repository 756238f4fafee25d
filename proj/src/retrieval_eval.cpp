#include "odmds/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "odmds/errors.hpp"

namespace odmds {

namespace {

void check_gold(const GoldSet& gold) {
  if (gold.empty()) throw std::invalid_argument("retrieval metrics need a non-empty gold set");
}

std::size_t hits_at_k(const std::vector<std::string>& ranked, const GoldSet& gold,
                      std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    if (gold.count(ranked[i])) ++hits;
  }
  return hits;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::vector<std::string> ids_of(const std::vector<RankedDoc>& docs) {
  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.doc_id);
  return ids;
}

}  // namespace

GoldMap gold_map_from_queries(const std::vector<QueryInstance>& queries) {
  GoldMap gold;
  for (const auto& q : queries) gold[q.query_id] = q.gold_doc_ids;
  return gold;
}

double precision_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  check_gold(gold);
  // Denominator stays k even when fewer than k documents were retrieved.
  return static_cast<double>(hits_at_k(ranked, gold, static_cast<std::size_t>(k))) /
         static_cast<double>(k);
}

double recall_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  check_gold(gold);
  return static_cast<double>(hits_at_k(ranked, gold, static_cast<std::size_t>(k))) /
         static_cast<double>(gold.size());
}

double ndcg_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  check_gold(gold);
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i) {
    if (gold.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i + 2));
  }
  double idcg = 0.0;
  std::size_t ideal = std::min<std::size_t>(gold.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i + 2));
  return dcg / idcg;
}

double average_precision(const std::vector<std::string>& ranked, const GoldSet& gold) {
  check_gold(gold);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (gold.count(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(gold.size());
}

double mean_average_precision(const RetrievalRun& run, const GoldMap& gold_map) {
  if (run.results.empty()) throw std::invalid_argument("mean_average_precision: empty run");
  double sum = 0.0;
  for (const auto& [query_id, docs] : run.results) {
    auto it = gold_map.find(query_id);
    if (it == gold_map.end()) {
      throw DataError("run query \"" + query_id + "\" has no gold entry");
    }
    GoldSet gold(it->second.begin(), it->second.end());
    sum += average_precision(ids_of(docs), gold);
  }
  return sum / static_cast<double>(run.results.size());
}

const TopKStrategy& TopKSet::get(const std::string& name) const {
  if (name == "min") return min;
  if (name == "mean") return mean;
  if (name == "max") return max;
  throw UsageError("unknown top-k strategy \"" + name + "\" (expected min, mean or max)");
}

TopKSet derive_topk(const std::vector<QueryInstance>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("derive_topk: empty dataset");
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = 0;
  std::int64_t sum = 0;
  for (const auto& q : dataset) {
    auto n = static_cast<std::int64_t>(q.gold_doc_ids.size());
    lo = std::min(lo, n);
    hi = std::max(hi, n);
    sum += n;
  }
  // Round-half-to-even on the exact rational sum/n.
  const auto n = static_cast<std::int64_t>(dataset.size());
  std::int64_t quot = sum / n;
  std::int64_t rem = sum % n;
  std::int64_t mean;
  if (2 * rem < n) {
    mean = quot;
  } else if (2 * rem > n) {
    mean = quot + 1;
  } else {
    mean = (quot % 2 == 0) ? quot : quot + 1;
  }
  return TopKSet{{"min", static_cast<int>(lo)},
                 {"mean", static_cast<int>(mean)},
                 {"max", static_cast<int>(hi)}};
}

RetrievalReportRow evaluate_run(const RetrievalRun& run, const GoldMap& gold_map, int k) {
  if (k < 1) throw std::invalid_argument("evaluate_run: k must be >= 1");
  if (gold_map.empty()) throw std::invalid_argument("evaluate_run: empty gold map");
  for (const auto& [query_id, docs] : run.results) {
    if (!gold_map.count(query_id)) {
      throw DataError("run query \"" + query_id + "\" has no gold entry");
    }
  }

  RetrievalReportRow row;
  row.retriever_tag = run.retriever_tag;
  row.k = k;
  double p_sum = 0.0, r_sum = 0.0, n_sum = 0.0, ap_sum = 0.0;
  for (const auto& [query_id, gold_ids] : gold_map) {
    GoldSet gold(gold_ids.begin(), gold_ids.end());
    std::vector<std::string> ranked;
    auto it = run.results.find(query_id);
    if (it != run.results.end()) ranked = ids_of(it->second);
    QueryEvalRow q;
    if (!ranked.empty()) {
      q.p_at_k = precision_at_k(ranked, gold, k);
      q.r_at_k = recall_at_k(ranked, gold, k);
      q.ndcg = ndcg_at_k(ranked, gold, k);
      q.ap = average_precision(ranked, gold);
    }
    p_sum += q.p_at_k;
    r_sum += q.r_at_k;
    n_sum += q.ndcg;
    ap_sum += q.ap;
    row.per_query.emplace(query_id, q);
  }
  const double n = static_cast<double>(gold_map.size());
  row.p_at_k = round2(100.0 * p_sum / n);
  row.r_at_k = round2(100.0 * r_sum / n);
  row.ndcg = round2(100.0 * n_sum / n);
  row.map = round2(100.0 * ap_sum / n);
  return row;
}

nlohmann::json retrieval_report_to_json(const std::string& dataset,
                                        const std::vector<RetrievalReportRow>& rows) {
  nlohmann::json out;
  out["dataset"] = dataset;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["strategy"] = row.strategy_name;
    r["retriever"] = row.retriever_tag;
    r["k"] = row.k;
    r["metrics"] = {{"p_at_k", row.p_at_k},
                    {"r_at_k", row.r_at_k},
                    {"ndcg", row.ndcg},
                    {"map", row.map}};
    nlohmann::json per_query = nlohmann::json::array();
    for (const auto& [query_id, q] : row.per_query) {
      per_query.push_back({{"query_id", query_id},
                           {"p_at_k", q.p_at_k},
                           {"r_at_k", q.r_at_k},
                           {"ndcg", q.ndcg},
                           {"ap", q.ap}});
    }
    r["per_query"] = std::move(per_query);
    jrows.push_back(std::move(r));
  }
  out["rows"] = std::move(jrows);
  return out;
}

std::string render_retrieval_table(const std::vector<RetrievalReportRow>& rows) {
  std::size_t strat_w = 8, retr_w = 9;
  for (const auto& row : rows) {
    std::string strat = row.strategy_name + "(" + std::to_string(row.k) + ")";
    strat_w = std::max(strat_w, strat.size());
    retr_w = std::max(retr_w, row.retriever_tag.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  auto num = [](double v) {
    std::string s = fmt2(v);
    return std::string(s.size() < 7 ? 7 - s.size() : 0, ' ') + s;
  };
  std::string out = pad("Top-k", strat_w) + "  " + pad("Retriever", retr_w) +
                    "     P@K     R@K    NDCG     MAP\n";
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& row : rows) {
    std::string strat = row.strategy_name + "(" + std::to_string(row.k) + ")";
    out += pad(strat, strat_w) + "  " + pad(row.retriever_tag, retr_w) + " " + num(row.p_at_k) +
           " " + num(row.r_at_k) + " " + num(row.ndcg) + " " + num(row.map) + "\n";
  }
  return out;
}

}  // namespace odmds
