#pragma once

#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "odmds/corpus.hpp"
#include "odmds/retrieval.hpp"

namespace odmds {

using GoldSet = std::unordered_set<std::string>;
using GoldMap = std::map<std::string, std::vector<std::string>>;  // query_id -> gold ids

GoldMap gold_map_from_queries(const std::vector<QueryInstance>& queries);

// Binary-relevance metrics over a ranked doc_id list. All of them reject an
// empty gold set (such queries are rejected at load time anyway).
double precision_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k);
double recall_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k);

// DCG = sum_{i<=k} rel_i / log2(i+1), normalized by the ideal ranking that
// places min(|gold|, k) relevant documents first.
double ndcg_at_k(const std::vector<std::string>& ranked, const GoldSet& gold, int k);

// AP = (1/|gold|) * sum over hit ranks r of precision@r; unretrieved gold
// documents contribute 0.
double average_precision(const std::vector<std::string>& ranked, const GoldSet& gold);

double mean_average_precision(const RetrievalRun& run, const GoldMap& gold_map);

struct TopKStrategy {
  std::string name;  // "min" | "mean" | "max"
  int k = 0;
};

struct TopKSet {
  TopKStrategy min, mean, max;
  const TopKStrategy& get(const std::string& name) const;
};

// k values from the gold-count distribution: minimum, maximum, and the
// round-half-to-even arithmetic mean.
TopKSet derive_topk(const std::vector<QueryInstance>& dataset);

struct QueryEvalRow {
  double p_at_k = 0.0, r_at_k = 0.0, ndcg = 0.0, ap = 0.0;  // raw [0, 1]
};

struct RetrievalReportRow {
  std::string retriever_tag;
  std::string strategy_name;
  int k = 0;
  // means over queries, x100, rounded to 2 decimals
  double p_at_k = 0.0, r_at_k = 0.0, ndcg = 0.0, map = 0.0;
  std::map<std::string, QueryEvalRow> per_query;
};

// Scores every gold query; queries the run has no list for score 0 on all
// four metrics. A run query without a gold entry is an error.
RetrievalReportRow evaluate_run(const RetrievalRun& run, const GoldMap& gold_map, int k);

nlohmann::json retrieval_report_to_json(const std::string& dataset,
                                        const std::vector<RetrievalReportRow>& rows);
std::string render_retrieval_table(const std::vector<RetrievalReportRow>& rows);

}  // namespace odmds
