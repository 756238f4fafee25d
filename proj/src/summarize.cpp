#include "odmds/summarize.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"

namespace odmds {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_docs(const std::vector<Document>& docs) {
  if (docs.empty()) throw std::invalid_argument("summarize: docs must be non-empty");
}

void check_budget(const StrategyConfig& cfg) {
  if (cfg.context_budget < 1) throw UsageError("context_budget must be >= 1");
}

// "DOCUMENT k:" header + truncated text per doc, blank-line separated.
// budgets[i] is the token budget for docs[i]; zero-budget docs are dropped.
// used records the ids that contributed text, in prompt order.
std::string assemble_docs(const std::vector<Document>& docs,
                          const std::vector<std::int64_t>& budgets, const TokenizerConfig& cfg,
                          std::vector<std::string>* used) {
  std::string out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (budgets[i] <= 0) continue;
    std::string part = truncate_to_budget(docs[i].text, budgets[i], cfg);
    if (part.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += "DOCUMENT " + std::to_string(++pos) + ":\n";
    out += part;
    if (used) used->push_back(docs[i].doc_id);
  }
  return out;
}

const PromptTemplate& flavor_template(const SummarizeContext& ctx, const StrategyConfig& cfg) {
  return ctx.templates.get(cfg.flavor);
}

// Runs independent requests with bounded concurrency; outputs keep request
// order, so results do not depend on the worker count.
std::vector<std::string> run_requests(LlmClient& llm, const std::vector<LlmRequest>& requests,
                                      int max_concurrency) {
  std::vector<std::string> outputs(requests.size());
  int workers = std::max(1, max_concurrency);
  workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), requests.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) outputs[i] = llm.complete(requests[i]).text;
    return outputs;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(requests.size());
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= requests.size()) return;
        try {
          outputs[i] = llm.complete(requests[i]).text;
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

}  // namespace

Strategy strategy_from_name(const std::string& name) {
  if (name == "truncate_all") return Strategy::truncate_all;
  if (name == "truncate_one") return Strategy::truncate_one;
  if (name == "map_reduce") return Strategy::map_reduce;
  if (name == "refine") return Strategy::refine;
  throw UsageError("unknown strategy \"" + name +
                   "\" (expected truncate_all, truncate_one, map_reduce or refine)");
}

RefineOrder refine_order_from_name(const std::string& name) {
  if (name == "high_to_low" || name == "h2l") return RefineOrder::high_to_low;
  if (name == "low_to_high" || name == "l2h") return RefineOrder::low_to_high;
  throw UsageError("unknown refine order \"" + name + "\" (expected high_to_low or low_to_high)");
}

std::string StrategyConfig::label() const {
  switch (strategy) {
    case Strategy::truncate_all:
      return "truncate_all";
    case Strategy::truncate_one:
      return "truncate_one";
    case Strategy::map_reduce:
      return "map_reduce";
    case Strategy::refine:
      return order == RefineOrder::high_to_low ? "refine_h2l" : "refine_l2h";
  }
  return "?";
}

SummaryRecord summarize(const std::vector<Document>& docs, const std::string& query,
                        const std::string& query_id, const StrategyConfig& cfg,
                        const SummarizeContext& ctx, LlmClient& llm) {
  switch (cfg.strategy) {
    case Strategy::truncate_all:
      return summarize_truncate_all(docs, query, query_id, cfg, ctx, llm);
    case Strategy::truncate_one:
      return summarize_truncate_one(docs, query, query_id, cfg, ctx, llm);
    case Strategy::map_reduce:
      return summarize_map_reduce(docs, query, query_id, cfg, ctx, llm);
    case Strategy::refine:
      return summarize_refine(docs, query, query_id, cfg, ctx, llm);
  }
  throw UsageError("unknown strategy");
}

SummaryRecord summarize_truncate_all(const std::vector<Document>& docs, const std::string& query,
                                     const std::string& query_id, const StrategyConfig& cfg,
                                     const SummarizeContext& ctx, LlmClient& llm) {
  check_docs(docs);
  check_budget(cfg);
  // Sequential allocation realizes "concatenate then truncate" on document
  // tokens: earlier (more relevant) documents eat the budget first.
  std::vector<std::int64_t> budgets(docs.size(), 0);
  std::int64_t remaining = cfg.context_budget;
  for (std::size_t i = 0; i < docs.size() && remaining > 0; ++i) {
    std::int64_t n = docs[i].token_count > 0 ? docs[i].token_count
                                             : count_tokens(docs[i].text, ctx.tokenizer);
    budgets[i] = std::min(n, remaining);
    remaining -= budgets[i];
  }
  SummaryRecord record;
  record.query_id = query_id;
  record.strategy = cfg.label();
  std::string block = assemble_docs(docs, budgets, ctx.tokenizer, &record.docs_used);
  LlmRequest req = render_prompt(flavor_template(ctx, cfg), block, query, cfg.max_output_tokens,
                                 cfg.temperature);
  record.summary = llm.complete(req).text;
  record.llm_calls = 1;
  return record;
}

SummaryRecord summarize_truncate_one(const std::vector<Document>& docs, const std::string& query,
                                     const std::string& query_id, const StrategyConfig& cfg,
                                     const SummarizeContext& ctx, LlmClient& llm) {
  check_docs(docs);
  check_budget(cfg);
  const auto n = static_cast<std::int64_t>(docs.size());
  const std::int64_t share = cfg.context_budget / n;
  if (share == 0) {
    throw UsageError("truncate_one: context_budget " + std::to_string(cfg.context_budget) +
                     " is smaller than the document count " + std::to_string(n) +
                     "; use fewer documents or a larger budget");
  }
  std::vector<std::int64_t> budgets(docs.size(), share);
  budgets[0] += cfg.context_budget - share * n;  // remainder goes to the rank-1 doc
  SummaryRecord record;
  record.query_id = query_id;
  record.strategy = cfg.label();
  std::string block = assemble_docs(docs, budgets, ctx.tokenizer, &record.docs_used);
  LlmRequest req = render_prompt(flavor_template(ctx, cfg), block, query, cfg.max_output_tokens,
                                 cfg.temperature);
  record.summary = llm.complete(req).text;
  record.llm_calls = 1;
  return record;
}

SummaryRecord summarize_map_reduce(const std::vector<Document>& docs, const std::string& query,
                                   const std::string& query_id, const StrategyConfig& cfg,
                                   const SummarizeContext& ctx, LlmClient& llm) {
  check_docs(docs);
  check_budget(cfg);
  if (cfg.chunk_budget < 1 || cfg.chunk_budget > cfg.context_budget) {
    throw UsageError("map_reduce: chunk_budget must satisfy 1 <= chunk_budget <= context_budget");
  }

  SummaryRecord record;
  record.query_id = query_id;
  record.strategy = cfg.label();

  std::vector<std::int64_t> budgets;
  budgets.reserve(docs.size());
  for (const auto& doc : docs) {
    budgets.push_back(doc.token_count > 0 ? doc.token_count
                                          : count_tokens(doc.text, ctx.tokenizer));
  }
  std::string block = assemble_docs(docs, budgets, ctx.tokenizer, &record.docs_used);
  auto chunks = chunk_text(block, cfg.chunk_budget, cfg.overlap, ctx.tokenizer);

  const PromptTemplate& map_tmpl = ctx.templates.get("map");
  std::vector<LlmRequest> map_requests;
  map_requests.reserve(chunks.size());
  for (const Chunk& chunk : chunks) {
    map_requests.push_back(
        render_prompt(map_tmpl, chunk.text, query, cfg.max_output_tokens, cfg.temperature));
  }
  std::vector<std::string> partials = run_requests(llm, map_requests, cfg.max_concurrency);
  record.llm_calls += static_cast<int>(partials.size());

  if (partials.size() == 1) {  // single chunk: the map output is the summary
    record.summary = partials.front();
    return record;
  }

  const PromptTemplate& reduce_tmpl = ctx.templates.get("reduce");
  auto join = [](const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += "\n\n";
      out += p;
    }
    return out;
  };

  std::string combined = join(partials);
  int levels = 0;
  while (count_tokens(combined, ctx.tokenizer) > cfg.context_budget) {
    if (++levels > 16) {
      throw ProviderError("map_reduce: reduce hierarchy is not converging (summaries too long)");
    }
    auto reduce_chunks = chunk_text(combined, cfg.chunk_budget, cfg.overlap, ctx.tokenizer);
    std::vector<LlmRequest> reduce_requests;
    reduce_requests.reserve(reduce_chunks.size());
    for (const Chunk& chunk : reduce_chunks) {
      reduce_requests.push_back(
          render_prompt(reduce_tmpl, chunk.text, query, cfg.max_output_tokens, cfg.temperature));
    }
    std::vector<std::string> next = run_requests(llm, reduce_requests, cfg.max_concurrency);
    record.llm_calls += static_cast<int>(next.size());
    combined = join(next);
  }

  LlmRequest req =
      render_prompt(reduce_tmpl, combined, query, cfg.max_output_tokens, cfg.temperature);
  record.summary = llm.complete(req).text;
  ++record.llm_calls;
  return record;
}

SummaryRecord summarize_refine(const std::vector<Document>& docs, const std::string& query,
                               const std::string& query_id, const StrategyConfig& cfg,
                               const SummarizeContext& ctx, LlmClient& llm) {
  check_docs(docs);
  check_budget(cfg);
  std::vector<const Document*> ordered;
  ordered.reserve(docs.size());
  for (const auto& doc : docs) ordered.push_back(&doc);
  if (cfg.order == RefineOrder::low_to_high) std::reverse(ordered.begin(), ordered.end());

  SummaryRecord record;
  record.query_id = query_id;
  record.strategy = cfg.label();

  std::string interim;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const Document& doc = *ordered[i];
    record.docs_used.push_back(doc.doc_id);
    LlmRequest req;
    if (i == 0) {
      std::string chunk = truncate_to_budget(doc.text, cfg.context_budget, ctx.tokenizer);
      req = render_prompt(ctx.templates.get("refine_init"), chunk, query, cfg.max_output_tokens,
                          cfg.temperature);
    } else {
      std::int64_t interim_tokens = count_tokens(interim, ctx.tokenizer);
      std::int64_t doc_budget = cfg.context_budget - interim_tokens;
      if (doc_budget <= 0) {
        throw UsageError("refine: interim summary (" + std::to_string(interim_tokens) +
                         " tokens) uses up the whole context_budget of " +
                         std::to_string(cfg.context_budget) + "; budget too small");
      }
      PromptBindings bindings;
      bindings["existing_summary"] = interim;
      bindings["chunk"] = truncate_to_budget(doc.text, doc_budget, ctx.tokenizer);
      bindings["query"] = query;
      req = render_prompt(ctx.templates.get("refine_step"), bindings, cfg.max_output_tokens,
                          cfg.temperature);
    }
    interim = llm.complete(req).text;
    ++record.llm_calls;
  }
  record.summary = interim;
  return record;
}

std::string summaries_to_jsonl(const std::vector<SummaryRecord>& records) {
  std::string out;
  for (const SummaryRecord& r : records) {
    ordered_json obj;
    obj["query_id"] = r.query_id;
    obj["strategy"] = r.strategy;
    obj["retriever"] = r.retriever_tag;
    obj["summary"] = r.summary;
    obj["llm_calls"] = r.llm_calls;
    obj["docs_used"] = r.docs_used;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_summaries(const std::vector<SummaryRecord>& records, const std::string& path) {
  write_file_atomic(path, summaries_to_jsonl(records));
}

std::vector<SummaryRecord> load_summaries(const std::string& path) {
  std::vector<SummaryRecord> out;
  for (const auto& [line_no, obj] : read_jsonl(path)) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object() || !obj.contains("query_id") || !obj.contains("summary")) {
      throw DataError(where + ": expected summary record with query_id and summary");
    }
    SummaryRecord r;
    r.query_id = obj.at("query_id").get<std::string>();
    r.strategy = obj.value("strategy", "");
    r.retriever_tag = obj.value("retriever", "");
    r.summary = obj.at("summary").get<std::string>();
    r.llm_calls = obj.value("llm_calls", 0);
    if (obj.contains("docs_used")) {
      r.docs_used = obj.at("docs_used").get<std::vector<std::string>>();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace odmds
