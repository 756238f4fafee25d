#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odmds/corpus.hpp"
#include "odmds/llm.hpp"
#include "odmds/prompts.hpp"
#include "odmds/summarize.hpp"
#include "odmds/tokenizer.hpp"

namespace odmds {

enum class RougeVariant { rouge1, rouge2, rougeL };

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  RougeVariant variant = RougeVariant::rouge2;
};

// Contiguous n-grams with multiplicity; fewer than n tokens yields an empty map.
std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n);

// overlap = sum over grams of min(count_cand, count_ref);
// P = overlap/|cand grams|, R = overlap/|ref grams|, F1 = 2PR/(P+R).
RougeScore rouge_n(const std::string& candidate, const std::string& reference, int n,
                   const TokenizerConfig& cfg);

// LCS-based: P = LCS/|cand tokens|, R = LCS/|ref tokens|.
RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   const TokenizerConfig& cfg);

// Reference-wise maximum by F1; P and R come from that same reference.
RougeScore multi_ref_rouge(const std::string& candidate,
                           const std::vector<std::string>& references, RougeVariant variant,
                           const TokenizerConfig& cfg);

enum class GevalDimension { consistency, relevance };

struct GevalScore {
  GevalDimension dimension = GevalDimension::consistency;
  std::optional<double> raw;  // in [1, 5]; empty when parsing failed
  int parse_failures = 0;
};

// Renders the dimension's rubric prompt with the reference standing in for
// the source article, asks the judge, and parses the first integer in 1..5
// from the reply ("Score: N" or a bare "N"). One retry on an unparseable
// reply, then the example is recorded as a parse failure and excluded from
// means.
GevalScore geval_score(const std::string& prediction, const std::string& reference,
                       GevalDimension dimension, LlmClient& llm, const TemplateSet& templates,
                       int max_output_tokens = 16);

// Parses the first integer in [1,5] from a judge reply; nullopt when absent.
std::optional<double> parse_geval_reply(const std::string& reply);

struct SummEvalQueryRow {
  double r1 = 0.0, r2 = 0.0, rl = 0.0;  // multi-ref F1, raw [0, 1]
  std::optional<double> geval_consistency;
  std::optional<double> geval_relevance;
};

struct SummEvalRow {
  std::string strategy;
  std::string retriever_tag;
  double r1 = 0.0, r2 = 0.0, rl = 0.0;  // means x100, 2 decimals
  std::optional<double> geval_consistency;  // raw 1-5 means
  std::optional<double> geval_relevance;
  std::optional<double> geval_combined;
  int n = 0;
  int parse_failures = 0;
  std::map<std::string, SummEvalQueryRow> per_query;
};

struct SummEvalReport {
  std::vector<SummEvalRow> rows;
};

// Groups records by (strategy, retriever); ROUGE always, judge columns only
// when a judge client is supplied. The judge compares each prediction against
// the query's first reference summary.
SummEvalReport evaluate_summaries(const std::vector<SummaryRecord>& summaries,
                                  const std::vector<QueryInstance>& queries,
                                  const TokenizerConfig& cfg, LlmClient* judge = nullptr,
                                  const TemplateSet* templates = nullptr);

nlohmann::json summ_report_to_json(const SummEvalReport& report);
std::string render_summ_table(const SummEvalReport& report);

}  // namespace odmds
