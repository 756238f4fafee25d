// odmds: retrieve-then-summarize pipeline for open-domain multi-document
// summarization. Subcommands cover dataset construction, indexing, retrieval,
// summarization and both evaluation stages; see README.md for the formats.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odmds/config.hpp"
#include "odmds/corpus.hpp"
#include "odmds/dataset_builder.hpp"
#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"
#include "odmds/retrieval.hpp"
#include "odmds/retrieval_eval.hpp"
#include "odmds/summ_eval.hpp"
#include "odmds/summarize.hpp"

namespace {

using namespace odmds;

std::string require_path(const std::string& value, const std::string& what) {
  if (value.empty()) throw UsageError("missing required path: " + what);
  return value;
}

struct BuildDatasetArgs {
  std::string mode;
  std::string qmds;
  std::string stories_dir;
  std::string source_corpus;
  double theta = 0.80;
  double theta_step = 0.05;
  std::size_t min_size = 2;
  std::size_t max_size = 6;
  std::string contextualize;
  std::string delimiter;
  std::string out_corpus, out_queries, out_report;
};

int cmd_build_dataset(const PipelineConfig& config, const BuildDatasetArgs& args,
                      const CLI::App& sub) {
  DatasetBuildOptions opts = config.dataset;
  if (sub.count("--mode")) opts.mode = args.mode;
  if (sub.count("--theta")) opts.theta = args.theta;
  if (sub.count("--theta-step")) opts.bounds.theta_step = args.theta_step;
  if (sub.count("--min-size")) opts.bounds.min_size = args.min_size;
  if (sub.count("--max-size")) opts.bounds.max_size = args.max_size;
  if (sub.count("--contextualize")) opts.contextualize = args.contextualize;
  if (sub.count("--delimiter-pattern")) opts.delimiter_pattern = args.delimiter;

  const std::string qmds_path = require_path(
      !args.qmds.empty() ? args.qmds : config.path_or("qmds", ""), "--qmds");
  const std::string out_corpus = require_path(
      !args.out_corpus.empty() ? args.out_corpus : config.path_or("corpus", ""), "--out-corpus");
  const std::string out_queries =
      require_path(!args.out_queries.empty() ? args.out_queries : config.path_or("queries", ""),
                   "--out-queries");
  const std::string out_report =
      require_path(!args.out_report.empty() ? args.out_report : config.path_or("build_report", ""),
                   "--out-report");

  TemplateSet templates = load_templates(config);
  std::unique_ptr<LlmClient> llm;
  LlmClient* llm_ptr = nullptr;
  const bool needs_llm = opts.mode == "meeting" || opts.contextualize != "none";
  if (needs_llm && config.llm.kind != "none") {
    llm = make_llm_client(config.llm, config.tokenizer);
    llm_ptr = llm.get();
  }

  auto records = load_qmds(qmds_path);
  DatasetBuildResult result;
  if (opts.mode == "story") {
    const std::string dir = require_path(args.stories_dir, "--stories-dir");
    std::vector<std::pair<std::string, std::string>> stories;
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no story files under " + dir);
    for (const auto& file : files) {
      stories.emplace_back(std::filesystem::path(file).stem().string(), read_file(file));
    }
    result = build_story_dataset(stories, records, opts, config.tokenizer, llm_ptr, templates);
  } else if (opts.mode == "meeting") {
    const std::string source_path = require_path(args.source_corpus, "--source-corpus");
    Corpus source = load_corpus(source_path, config.tokenizer);
    Embedder embedder = make_embedder(config.embedding, config.tokenizer);
    result = build_meeting_dataset(records, source, opts, embedder, llm_ptr, templates);
  } else {
    throw UsageError("--mode must be story or meeting, got \"" + opts.mode + "\"");
  }

  write_corpus(result.corpus, out_corpus);
  write_queries(result.queries, out_queries);
  write_file_atomic(out_report, result.report.dump(2) + "\n");
  std::cerr << "wrote " << result.corpus.size() << " documents, " << result.queries.size()
            << " queries\n";
  return 0;
}

struct IndexArgs {
  std::string corpus;
  std::string kind = "both";
  std::string out_sparse, out_dense;
};

int cmd_index(const PipelineConfig& config, const IndexArgs& args) {
  const std::string corpus_path =
      require_path(!args.corpus.empty() ? args.corpus : config.path_or("corpus", ""), "--corpus");
  Corpus corpus = load_corpus(corpus_path, config.tokenizer);
  if (args.kind != "sparse" && args.kind != "dense" && args.kind != "both") {
    throw UsageError("--kind must be sparse, dense or both");
  }
  if (args.kind == "sparse" || args.kind == "both") {
    const std::string out = require_path(
        !args.out_sparse.empty() ? args.out_sparse : config.path_or("sparse_index", ""),
        "--out-sparse");
    save_sparse_index(build_sparse_index(corpus), out);
    std::cerr << "sparse index: " << out << "\n";
  }
  if (args.kind == "dense" || args.kind == "both") {
    const std::string out = require_path(
        !args.out_dense.empty() ? args.out_dense : config.path_or("dense_index", ""),
        "--out-dense");
    save_dense_index(build_dense_index(corpus, config.embedding), out);
    std::cerr << "dense index: " << out << "\n";
  }
  return 0;
}

struct RetrieveArgs {
  std::string retriever;
  std::string index;
  std::string queries;
  int k = 0;
  std::string strategy;
  double k1 = 1.2, b = 0.75;
  std::string tag;
  std::string out_run;
};

int cmd_retrieve(const PipelineConfig& config, const RetrieveArgs& args, const CLI::App& sub) {
  const std::string queries_path = require_path(
      !args.queries.empty() ? args.queries : config.path_or("queries", ""), "--queries");
  const std::string index_path = require_path(args.index, "--index");
  const std::string out_run =
      require_path(!args.out_run.empty() ? args.out_run : config.path_or("run", ""), "--out-run");
  auto queries = load_queries(queries_path);

  int k = args.k;
  std::string strategy_name = "k";
  if (!args.strategy.empty()) {
    TopKSet topk = derive_topk(queries);
    k = topk.get(args.strategy).k;
    strategy_name = args.strategy;
  }
  if (k < 1) throw UsageError("give --k N or --strategy {min,mean,max}");

  double k1 = sub.count("--k1") ? args.k1 : config.bm25.k1;
  double b = sub.count("--b") ? args.b : config.bm25.b;

  RetrievalRun run;
  run.k = k;
  if (args.retriever == "sparse") {
    SparseIndex index = load_sparse_index(index_path, config.tokenizer);
    run.retriever_tag = args.tag.empty() ? "bm25" : args.tag;
    for (const auto& q : queries) {
      run.results[q.query_id] = search_sparse(index, q.query, k, k1, b);
    }
  } else if (args.retriever == "dense") {
    DenseIndex index = load_dense_index(index_path, config.tokenizer);
    run.retriever_tag = args.tag.empty() ? index.provider_tag : args.tag;
    for (const auto& q : queries) {
      run.results[q.query_id] = search_dense(index, q.query, config.embedding, k);
    }
  } else {
    throw UsageError("--retriever must be sparse or dense");
  }

  write_run(run, out_run);
  nlohmann::json meta;
  meta["retriever_tag"] = run.retriever_tag;
  meta["k"] = k;
  meta["strategy"] = strategy_name;
  write_file_atomic(out_run + ".meta.json", meta.dump(2) + "\n");
  std::cerr << "run: " << out_run << " (k=" << k << ", strategy=" << strategy_name << ")\n";
  return 0;
}

struct EvalRetrievalArgs {
  std::vector<std::string> runs;
  std::string queries;
  int k = 0;
  std::string strategy;
  std::string dataset = "dataset";
  std::string out_report;
  bool table = false;
};

int cmd_eval_retrieval(const PipelineConfig& config, const EvalRetrievalArgs& args) {
  const std::string queries_path = require_path(
      !args.queries.empty() ? args.queries : config.path_or("queries", ""), "--queries");
  if (args.runs.empty()) throw UsageError("give at least one --run");
  const std::string out_report = require_path(
      !args.out_report.empty() ? args.out_report : config.path_or("retrieval_report", ""),
      "--out-report");
  auto queries = load_queries(queries_path);
  GoldMap gold = gold_map_from_queries(queries);

  int k = args.k;
  std::string strategy_name = "k";
  if (!args.strategy.empty()) {
    k = derive_topk(queries).get(args.strategy).k;
    strategy_name = args.strategy;
  }
  if (k < 1) throw UsageError("give --k N or --strategy {min,mean,max}");

  std::vector<RetrievalReportRow> rows;
  for (const auto& run_path : args.runs) {
    RetrievalRun run = load_run(run_path);
    RetrievalReportRow row = evaluate_run(run, gold, k);
    row.strategy_name = strategy_name;
    rows.push_back(std::move(row));
  }
  write_file_atomic(out_report, retrieval_report_to_json(args.dataset, rows).dump(2) + "\n");
  if (args.table) std::cout << render_retrieval_table(rows);
  std::cerr << "retrieval report: " << out_report << "\n";
  return 0;
}

struct SummarizeArgs {
  std::string corpus;
  std::string queries;
  std::string run;
  bool oracle = false;
  std::string strategy;
  std::string order;
  std::int64_t context_budget = 0;
  std::int64_t chunk_budget = 0;
  std::int64_t overlap = -1;
  int max_output_tokens = 0;
  std::string flavor;
  std::string out_summaries;
};

int cmd_summarize(const PipelineConfig& config, const SummarizeArgs& args, const CLI::App& sub) {
  const std::string corpus_path =
      require_path(!args.corpus.empty() ? args.corpus : config.path_or("corpus", ""), "--corpus");
  const std::string queries_path = require_path(
      !args.queries.empty() ? args.queries : config.path_or("queries", ""), "--queries");
  const std::string out_path = require_path(
      !args.out_summaries.empty() ? args.out_summaries : config.path_or("summaries", ""),
      "--out-summaries");
  const bool run_given = !args.run.empty();
  if (args.oracle == run_given) {
    throw UsageError("give exactly one of --run <path> or --oracle");
  }

  StrategyConfig cfg = config.strategy;
  if (sub.count("--strategy")) cfg.strategy = strategy_from_name(args.strategy);
  if (sub.count("--order")) cfg.order = refine_order_from_name(args.order);
  if (sub.count("--context-budget")) cfg.context_budget = args.context_budget;
  if (sub.count("--chunk-budget")) cfg.chunk_budget = args.chunk_budget;
  if (sub.count("--overlap")) cfg.overlap = args.overlap;
  if (sub.count("--max-output-tokens")) cfg.max_output_tokens = args.max_output_tokens;
  if (sub.count("--flavor")) cfg.flavor = args.flavor;

  Corpus corpus = load_corpus(corpus_path, config.tokenizer);
  auto queries = load_queries(queries_path, corpus);
  TemplateSet templates = load_templates(config);
  std::unique_ptr<LlmClient> llm = make_llm_client(config.llm, config.tokenizer);
  SummarizeContext ctx{templates, config.tokenizer};

  RetrievalRun run;
  std::string retriever_tag = "oracle";
  if (!args.oracle) {
    run = load_run(args.run);
    retriever_tag = run.retriever_tag;
  }

  std::map<std::string, SummaryRecord> records;  // query_id order
  for (const auto& q : queries) {
    std::vector<std::string> doc_ids;
    if (args.oracle) {
      doc_ids = q.gold_doc_ids;  // gold order = queries-file order
    } else {
      auto it = run.results.find(q.query_id);
      if (it == run.results.end() || it->second.empty()) {
        std::cerr << "warning: no retrieved documents for query \"" << q.query_id
                  << "\"; skipping\n";
        continue;
      }
      for (const auto& d : it->second) doc_ids.push_back(d.doc_id);
    }
    std::vector<Document> docs;
    docs.reserve(doc_ids.size());
    for (const auto& id : doc_ids) docs.push_back(corpus.at_id(id));
    SummaryRecord record = summarize(docs, q.query, q.query_id, cfg, ctx, *llm);
    record.retriever_tag = retriever_tag;
    records.emplace(q.query_id, std::move(record));
  }

  std::vector<SummaryRecord> ordered;
  ordered.reserve(records.size());
  for (auto& [query_id, record] : records) ordered.push_back(std::move(record));
  write_summaries(ordered, out_path);
  std::cerr << "summaries: " << out_path << " (" << ordered.size() << " records)\n";
  return 0;
}

struct EvalSummariesArgs {
  std::string summaries;
  std::string queries;
  bool geval = false;
  std::string out_report;
  bool table = false;
};

int cmd_eval_summaries(const PipelineConfig& config, const EvalSummariesArgs& args) {
  const std::string summaries_path = require_path(
      !args.summaries.empty() ? args.summaries : config.path_or("summaries", ""), "--summaries");
  const std::string queries_path = require_path(
      !args.queries.empty() ? args.queries : config.path_or("queries", ""), "--queries");
  const std::string out_report = require_path(
      !args.out_report.empty() ? args.out_report : config.path_or("summ_report", ""),
      "--out-report");

  auto summaries = load_summaries(summaries_path);
  auto queries = load_queries(queries_path);
  TemplateSet templates = load_templates(config);
  std::unique_ptr<LlmClient> judge;
  if (args.geval) judge = make_llm_client(config.llm, config.tokenizer);

  SummEvalReport report =
      evaluate_summaries(summaries, queries, config.tokenizer, judge.get(), &templates);
  write_file_atomic(out_report, summ_report_to_json(report).dump(2) + "\n");
  if (args.table) std::cout << render_summ_table(report);
  std::cerr << "summarization report: " << out_report << "\n";
  return 0;
}

struct ReportArgs {
  std::vector<std::string> retrieval_reports;
  std::vector<std::string> summ_reports;
};

int cmd_report(const ReportArgs& args) {
  for (const auto& path : args.retrieval_reports) {
    nlohmann::json obj = nlohmann::json::parse(read_file(path));
    std::vector<RetrievalReportRow> rows;
    for (const auto& r : obj.at("rows")) {
      RetrievalReportRow row;
      row.strategy_name = r.value("strategy", "");
      row.retriever_tag = r.value("retriever", "");
      row.k = r.value("k", 0);
      row.p_at_k = r.at("metrics").value("p_at_k", 0.0);
      row.r_at_k = r.at("metrics").value("r_at_k", 0.0);
      row.ndcg = r.at("metrics").value("ndcg", 0.0);
      row.map = r.at("metrics").value("map", 0.0);
      rows.push_back(std::move(row));
    }
    std::cout << "== retrieval: " << obj.value("dataset", "") << " (" << path << ")\n";
    std::cout << render_retrieval_table(rows) << "\n";
  }
  for (const auto& path : args.summ_reports) {
    nlohmann::json obj = nlohmann::json::parse(read_file(path));
    SummEvalReport report;
    for (const auto& r : obj.at("rows")) {
      SummEvalRow row;
      row.strategy = r.value("strategy", "");
      row.retriever_tag = r.value("retriever", "");
      row.r1 = r.value("r1", 0.0);
      row.r2 = r.value("r2", 0.0);
      row.rl = r.value("rl", 0.0);
      if (r.contains("geval_consistency") && !r["geval_consistency"].is_null()) {
        row.geval_consistency = r["geval_consistency"].get<double>();
      }
      if (r.contains("geval_relevance") && !r["geval_relevance"].is_null()) {
        row.geval_relevance = r["geval_relevance"].get<double>();
      }
      if (r.contains("geval_combined") && !r["geval_combined"].is_null()) {
        row.geval_combined = r["geval_combined"].get<double>();
      }
      row.n = r.value("n", 0);
      row.parse_failures = r.value("parse_failures", 0);
      report.rows.push_back(std::move(row));
    }
    std::cout << "== summarization (" << path << ")\n";
    std::cout << render_summ_table(report) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieve-then-summarize pipeline for open-domain multi-document summarization"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // allow --config after the subcommand name
  std::string config_path;
  app.add_option("--config", config_path, "Pipeline config JSON (flags override its fields)");
  bool dump_templates = false;
  app.add_flag("--dump-templates", dump_templates,
               "Print the default prompt templates as editable JSON and exit");

  BuildDatasetArgs bd;
  auto* sub_bd = app.add_subcommand("build-dataset", "Build an ODMDS corpus + query set");
  sub_bd->add_option("--mode", bd.mode, "story | meeting");
  sub_bd->add_option("--qmds", bd.qmds, "qMDS JSONL: {query, doc_ids, summaries}");
  sub_bd->add_option("--stories-dir", bd.stories_dir, "Directory of story HTML files (story mode)");
  sub_bd->add_option("--source-corpus", bd.source_corpus,
                     "Corpus JSONL the qMDS doc_ids reference (meeting mode)");
  sub_bd->add_option("--theta", bd.theta, "Query clustering similarity threshold");
  sub_bd->add_option("--theta-step", bd.theta_step, "Threshold step for splitting oversized clusters");
  sub_bd->add_option("--min-size", bd.min_size, "Minimum cluster size");
  sub_bd->add_option("--max-size", bd.max_size, "Maximum cluster size");
  sub_bd->add_option("--contextualize", bd.contextualize, "none | title | title+answer");
  sub_bd->add_option("--delimiter-pattern", bd.delimiter, "Chapter delimiter, * is a wildcard");
  sub_bd->add_option("--out-corpus", bd.out_corpus, "Output corpus JSONL");
  sub_bd->add_option("--out-queries", bd.out_queries, "Output queries JSONL");
  sub_bd->add_option("--out-report", bd.out_report, "Output build report JSON");

  IndexArgs ix;
  auto* sub_ix = app.add_subcommand("index", "Build sparse and/or dense indexes");
  sub_ix->add_option("--corpus", ix.corpus, "Corpus JSONL");
  sub_ix->add_option("--kind", ix.kind, "sparse | dense | both");
  sub_ix->add_option("--out-sparse", ix.out_sparse, "Sparse index output path");
  sub_ix->add_option("--out-dense", ix.out_dense, "Dense index output path");

  RetrieveArgs rt;
  auto* sub_rt = app.add_subcommand("retrieve", "Rank documents for every query");
  sub_rt->add_option("--retriever", rt.retriever, "sparse | dense")->required();
  sub_rt->add_option("--index", rt.index, "Index file")->required();
  sub_rt->add_option("--queries", rt.queries, "Queries JSONL");
  auto* rt_k = sub_rt->add_option("--k", rt.k, "Explicit cutoff");
  sub_rt->add_option("--strategy", rt.strategy, "min | mean | max (k from gold counts)")
      ->excludes(rt_k);
  sub_rt->add_option("--k1", rt.k1, "BM25 k1");
  sub_rt->add_option("--b", rt.b, "BM25 b");
  sub_rt->add_option("--tag", rt.tag, "Run tag (defaults to retriever name)");
  sub_rt->add_option("--out-run", rt.out_run, "TREC run output path");

  EvalRetrievalArgs er;
  auto* sub_er = app.add_subcommand("eval-retrieval", "Score runs with P@K/R@K/NDCG/MAP");
  sub_er->add_option("--run", er.runs, "TREC run file (repeatable)");
  sub_er->add_option("--queries", er.queries, "Queries JSONL with gold_doc_ids");
  auto* er_k = sub_er->add_option("--k", er.k, "Explicit cutoff");
  sub_er->add_option("--strategy", er.strategy, "min | mean | max")->excludes(er_k);
  sub_er->add_option("--dataset", er.dataset, "Dataset name for the report");
  sub_er->add_option("--out-report", er.out_report, "Report JSON output path");
  sub_er->add_flag("--table", er.table, "Print the aligned text table");

  SummarizeArgs sm;
  auto* sub_sm = app.add_subcommand("summarize", "Summarize retrieved or gold documents");
  sub_sm->add_option("--corpus", sm.corpus, "Corpus JSONL");
  sub_sm->add_option("--queries", sm.queries, "Queries JSONL");
  sub_sm->add_option("--run", sm.run, "TREC run file with the documents to summarize");
  sub_sm->add_flag("--oracle", sm.oracle, "Summarize the gold documents instead of a run");
  sub_sm->add_option("--strategy", sm.strategy,
                     "truncate_all | truncate_one | map_reduce | refine");
  sub_sm->add_option("--order", sm.order, "Refine order: high_to_low | low_to_high");
  sub_sm->add_option("--context-budget", sm.context_budget, "Document tokens per LLM call");
  sub_sm->add_option("--chunk-budget", sm.chunk_budget, "Chunk tokens (map_reduce)");
  sub_sm->add_option("--overlap", sm.overlap, "Chunk overlap tokens (map_reduce)");
  sub_sm->add_option("--max-output-tokens", sm.max_output_tokens, "Completion budget");
  sub_sm->add_option("--flavor", sm.flavor, "Base prompt: story | meeting");
  sub_sm->add_option("--out-summaries", sm.out_summaries, "Summaries JSONL output path");

  EvalSummariesArgs es;
  auto* sub_es = app.add_subcommand("eval-summaries", "Score summaries with ROUGE and G-EVAL");
  sub_es->add_option("--summaries", es.summaries, "Summaries JSONL");
  sub_es->add_option("--queries", es.queries, "Queries JSONL with references");
  sub_es->add_flag("--geval", es.geval, "Also run the LLM judge (uses the configured llm)");
  sub_es->add_option("--out-report", es.out_report, "Report JSON output path");
  sub_es->add_flag("--table", es.table, "Print the aligned text table");

  ReportArgs rp;
  auto* sub_rp = app.add_subcommand("report", "Render report JSONs as text tables");
  sub_rp->add_option("--retrieval-report", rp.retrieval_reports, "Retrieval report JSON (repeatable)");
  sub_rp->add_option("--summ-report", rp.summ_reports, "Summarization report JSON (repeatable)");

  try {
    app.parse(argc, argv);

    if (dump_templates) {
      TemplateSet defaults = TemplateSet::defaults();
      nlohmann::ordered_json out;
      for (const auto& [name, tmpl] : defaults.all()) {
        out[name] = {{"system", tmpl.system_text}, {"user", tmpl.user_text}};
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    PipelineConfig config;
    if (!config_path.empty()) config = load_pipeline_config(config_path);

    if (sub_bd->parsed()) return cmd_build_dataset(config, bd, *sub_bd);
    if (sub_ix->parsed()) return cmd_index(config, ix);
    if (sub_rt->parsed()) return cmd_retrieve(config, rt, *sub_rt);
    if (sub_er->parsed()) return cmd_eval_retrieval(config, er);
    if (sub_sm->parsed()) return cmd_summarize(config, sm, *sub_sm);
    if (sub_es->parsed()) return cmd_eval_summaries(config, es);
    if (sub_rp->parsed()) return cmd_report(rp);
    throw UsageError("no subcommand given");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
