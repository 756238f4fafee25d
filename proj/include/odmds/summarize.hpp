#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odmds/corpus.hpp"
#include "odmds/llm.hpp"
#include "odmds/prompts.hpp"

namespace odmds {

enum class Strategy { truncate_all, truncate_one, map_reduce, refine };
enum class RefineOrder { high_to_low, low_to_high };

Strategy strategy_from_name(const std::string& name);
RefineOrder refine_order_from_name(const std::string& name);

struct StrategyConfig {
  Strategy strategy = Strategy::truncate_all;
  std::int64_t context_budget = 3000;  // tokens of document text per call
  std::int64_t chunk_budget = 1500;    // map_reduce only
  std::int64_t overlap = 0;            // map_reduce only
  RefineOrder order = RefineOrder::high_to_low;  // refine only
  int max_output_tokens = 512;
  double temperature = 0.0;
  std::string flavor = "story";  // which base template: story | meeting
  int max_concurrency = 1;       // parallel map calls; 1 keeps scripted mocks in order

  std::string label() const;  // e.g. "refine_h2l", written into SummaryRecords
};

struct SummaryRecord {
  std::string query_id;
  std::string strategy;
  std::string retriever_tag;
  std::string summary;
  int llm_calls = 0;
  std::vector<std::string> docs_used;  // order the documents entered the prompt(s)
};

struct SummarizeContext {
  const TemplateSet& templates;
  TokenizerConfig tokenizer;
};

// Ranked documents in, one summary out. Dispatches on cfg.strategy.
SummaryRecord summarize(const std::vector<Document>& docs, const std::string& query,
                        const std::string& query_id, const StrategyConfig& cfg,
                        const SummarizeContext& ctx, LlmClient& llm);

// Concatenates documents in rank order (DOCUMENT k: headers, blank-line
// separated) and truncates the concatenation to context_budget; one call.
SummaryRecord summarize_truncate_all(const std::vector<Document>& docs, const std::string& query,
                                     const std::string& query_id, const StrategyConfig& cfg,
                                     const SummarizeContext& ctx, LlmClient& llm);

// Gives each document floor(context_budget / n) tokens, remainder to the
// rank-1 document; one call over the combined truncations.
SummaryRecord summarize_truncate_one(const std::vector<Document>& docs, const std::string& query,
                                     const std::string& query_id, const StrategyConfig& cfg,
                                     const SummarizeContext& ctx, LlmClient& llm);

// Chunks the concatenation, summarizes each chunk (map), then consolidates
// the partial summaries (reduce), re-chunking hierarchically when they do not
// fit one call. A single-chunk input skips the reduce step entirely.
SummaryRecord summarize_map_reduce(const std::vector<Document>& docs, const std::string& query,
                                   const std::string& query_id, const StrategyConfig& cfg,
                                   const SummarizeContext& ctx, LlmClient& llm);

// Sequentially folds each document into an interim summary, in rank order or
// reversed; exactly one call per document.
SummaryRecord summarize_refine(const std::vector<Document>& docs, const std::string& query,
                               const std::string& query_id, const StrategyConfig& cfg,
                               const SummarizeContext& ctx, LlmClient& llm);

std::string summaries_to_jsonl(const std::vector<SummaryRecord>& records);
void write_summaries(const std::vector<SummaryRecord>& records, const std::string& path);
std::vector<SummaryRecord> load_summaries(const std::string& path);

}  // namespace odmds
