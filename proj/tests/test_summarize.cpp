#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "odmds/errors.hpp"
#include "odmds/summarize.hpp"

using namespace odmds;

namespace {

TokenizerConfig ws_cfg() { return TokenizerConfig{}; }

std::string words(const std::string& prefix, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += prefix + std::to_string(i);
  }
  return out;
}

std::vector<Document> three_docs(int tokens_each = 6) {
  return {Document{"dA", std::nullopt, words("a", tokens_each), tokens_each},
          Document{"dB", std::nullopt, words("b", tokens_each), tokens_each},
          Document{"dC", std::nullopt, words("c", tokens_each), tokens_each}};
}

// token allowance for one request: payload budget + the rendered template
// with empty slots + 2 header tokens ("DOCUMENT k:") per document
void check_budget(const LlmRequest& req, std::int64_t payload_budget,
                  const TemplateSet& templates, const TokenizerConfig& cfg, std::size_t n_docs) {
  std::int64_t overhead = 0;
  PromptBindings blank;
  for (const char* slot :
       {"story", "meeting", "docs", "chunk", "query", "existing_summary"}) {
    blank[slot] = "";
  }
  overhead = count_tokens(render_text(templates.get(req.tag).user_text, blank), cfg);
  std::int64_t allowed = payload_budget + overhead + 2 * static_cast<std::int64_t>(n_docs);
  CHECK(count_tokens(req.user, cfg) <= allowed);
}

struct Setup {
  TemplateSet templates = TemplateSet::defaults();
  SummarizeContext ctx{templates, ws_cfg()};
};

}  // namespace

TEST_CASE("truncate_all keeps rank order and respects the budget") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::truncate_all;
  cfg.context_budget = 100;
  ScriptedLlmClient inner({"OUT"});
  RecordingLlmClient llm(inner);

  auto record = summarize_truncate_all(three_docs(), "What?", "q1", cfg, s.ctx, llm);
  CHECK(record.summary == "OUT");
  CHECK(record.llm_calls == 1);
  CHECK(record.strategy == "truncate_all");
  CHECK(record.docs_used == std::vector<std::string>{"dA", "dB", "dC"});
  REQUIRE(llm.requests().size() == 1);
  const std::string& user = llm.requests()[0].user;
  CHECK(user.find(words("a", 6)) < user.find(words("b", 6)));
  CHECK(user.find(words("b", 6)) < user.find(words("c", 6)));
  CHECK(user.find("QUESTION:What?") != std::string::npos);
  check_budget(llm.requests()[0], cfg.context_budget, s.templates, ws_cfg(), 3);
}

TEST_CASE("truncate_all with a budget below doc 1 keeps only its prefix") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::truncate_all;
  cfg.context_budget = 4;  // doc 1 alone has 6 tokens
  ScriptedLlmClient inner({"OUT"});
  RecordingLlmClient llm(inner);
  auto record = summarize_truncate_all(three_docs(), "What?", "q1", cfg, s.ctx, llm);
  const std::string& user = llm.requests()[0].user;
  CHECK(user.find("a0 a1 a2 a3") != std::string::npos);
  CHECK(user.find("a4") == std::string::npos);
  CHECK(user.find("b0") == std::string::npos);  // later docs absent entirely
  CHECK(record.docs_used == std::vector<std::string>{"dA"});
  check_budget(llm.requests()[0], cfg.context_budget, s.templates, ws_cfg(), 1);
}

TEST_CASE("truncate_all with the extractive mock yields a prefix of doc 1") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::truncate_all;
  cfg.context_budget = 50;
  cfg.max_output_tokens = 5;
  ExtractiveLlmClient llm(ws_cfg());
  auto record = summarize_truncate_all(three_docs(), "What?", "q1", cfg, s.ctx, llm);
  // the extract starts with the headered block, whose first payload is doc 1
  CHECK(record.summary.find("DOCUMENT 1:") != std::string::npos);
  CHECK(record.summary.find("a0 a1 a2") != std::string::npos);
  CHECK(record.summary.find("b0") == std::string::npos);
}

TEST_CASE("truncate_one shares the budget with the remainder on rank 1") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::truncate_one;

  SUBCASE("even split: 3 docs, budget 9") {
    cfg.context_budget = 9;
    ScriptedLlmClient inner({"OUT"});
    RecordingLlmClient llm(inner);
    summarize_truncate_one(three_docs(), "What?", "q1", cfg, s.ctx, llm);
    const std::string& user = llm.requests()[0].user;
    CHECK(user.find("a0 a1 a2") != std::string::npos);
    CHECK(user.find("a3") == std::string::npos);
    CHECK(user.find("b0 b1 b2") != std::string::npos);
    CHECK(user.find("b3") == std::string::npos);
    CHECK(user.find("c0 c1 c2") != std::string::npos);
    CHECK(user.find("c3") == std::string::npos);
    check_budget(llm.requests()[0], cfg.context_budget, s.templates, ws_cfg(), 3);
  }

  SUBCASE("remainder rule: 3 docs, budget 10 gives shares 4,3,3") {
    cfg.context_budget = 10;
    ScriptedLlmClient inner({"OUT"});
    RecordingLlmClient llm(inner);
    summarize_truncate_one(three_docs(), "What?", "q1", cfg, s.ctx, llm);
    const std::string& user = llm.requests()[0].user;
    CHECK(user.find("a0 a1 a2 a3") != std::string::npos);
    CHECK(user.find("a4") == std::string::npos);
    CHECK(user.find("b0 b1 b2") != std::string::npos);
    CHECK(user.find("b3") == std::string::npos);
    CHECK(user.find("c0 c1 c2") != std::string::npos);
    CHECK(user.find("c3") == std::string::npos);
  }

  SUBCASE("zero share is an error") {
    cfg.context_budget = 2;
    ScriptedLlmClient llm({"OUT"});
    CHECK_THROWS_WITH_AS(summarize_truncate_one(three_docs(), "What?", "q1", cfg, s.ctx, llm),
                         doctest::Contains("budget"), UsageError);
  }
}

TEST_CASE("truncate_one with one doc issues the same request as truncate_all") {
  Setup s;
  StrategyConfig cfg;
  cfg.context_budget = 10;
  std::vector<Document> one = {Document{"dA", std::nullopt, words("a", 6), 6}};

  cfg.strategy = Strategy::truncate_all;
  ScriptedLlmClient inner_a({"OUT"});
  RecordingLlmClient llm_a(inner_a);
  summarize_truncate_all(one, "What?", "q1", cfg, s.ctx, llm_a);

  cfg.strategy = Strategy::truncate_one;
  ScriptedLlmClient inner_b({"OUT"});
  RecordingLlmClient llm_b(inner_b);
  summarize_truncate_one(one, "What?", "q1", cfg, s.ctx, llm_b);

  CHECK(llm_a.requests()[0].user == llm_b.requests()[0].user);
  CHECK(llm_a.requests()[0].system == llm_b.requests()[0].system);
}

TEST_CASE("map_reduce call counts match the closed forms") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::map_reduce;

  SUBCASE("single chunk: 1 call, reduce skipped") {
    cfg.context_budget = 100;
    cfg.chunk_budget = 100;
    ScriptedLlmClient inner({"M1"});
    RecordingLlmClient llm(inner);
    auto record = summarize_map_reduce(three_docs(), "What?", "q1", cfg, s.ctx, llm);
    CHECK(record.llm_calls == 1);
    CHECK(record.summary == "M1");
    CHECK(llm.requests()[0].tag == "map");
  }

  SUBCASE("3 chunks: 3 map + 1 reduce") {
    // 3 docs x 6 tokens + 3 headers x 2 tokens = 24 tokens, chunk budget 8 -> 3 chunks
    cfg.context_budget = 100;
    cfg.chunk_budget = 8;
    ScriptedLlmClient inner({"M1", "M2", "M3", "FINAL"});
    RecordingLlmClient llm(inner);
    auto record = summarize_map_reduce(three_docs(), "What?", "q1", cfg, s.ctx, llm);
    CHECK(record.llm_calls == 4);
    CHECK(record.summary == "FINAL");
    REQUIRE(llm.requests().size() == 4);
    for (int i = 0; i < 3; ++i) {
      CHECK(llm.requests()[static_cast<std::size_t>(i)].tag == "map");
      check_budget(llm.requests()[static_cast<std::size_t>(i)], cfg.chunk_budget, s.templates,
                   ws_cfg(), 0);
    }
    CHECK(llm.requests()[3].tag == "reduce");
    CHECK(llm.requests()[3].user.find("M1") != std::string::npos);
    CHECK(llm.requests()[3].user.find("M2") != std::string::npos);
    CHECK(llm.requests()[3].user.find("M3") != std::string::npos);
    // each map request contains exactly one chunk: chunks tile the block
    CHECK(llm.requests()[0].user.find("a0") != std::string::npos);
    CHECK(llm.requests()[0].user.find("b0") == std::string::npos);
  }

  SUBCASE("hierarchical reduce: 3 map + 2 consolidation + 1 final = 6 calls") {
    cfg.context_budget = 8;
    cfg.chunk_budget = 8;
    // map outputs of 5 tokens each join to 15 tokens > 8, re-chunking into
    // exactly two 8/7-token consolidation calls
    std::string long_summary_1 = words("s", 5);
    std::string long_summary_2 = words("t", 5);
    std::string long_summary_3 = words("u", 5);
    ScriptedLlmClient inner(
        {long_summary_1, long_summary_2, long_summary_3, "R1", "R2", "FINAL"});
    RecordingLlmClient llm(inner);
    // 3 docs x 6 tokens + headers = 24 tokens -> 3 chunks of 8
    auto record = summarize_map_reduce(three_docs(), "What?", "q1", cfg, s.ctx, llm);
    CHECK(record.llm_calls == 6);
    CHECK(record.summary == "FINAL");
    REQUIRE(llm.requests().size() == 6);
    CHECK(llm.requests()[3].tag == "reduce");
    CHECK(llm.requests()[4].tag == "reduce");
    CHECK(llm.requests()[5].tag == "reduce");
    CHECK(llm.requests()[5].user.find("R1") != std::string::npos);
    CHECK(llm.requests()[5].user.find("R2") != std::string::npos);
  }
}

TEST_CASE("refine is sequential with one call per document") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::refine;
  cfg.context_budget = 100;

  SUBCASE("one doc degenerates to a single init call") {
    std::vector<Document> one = {Document{"dA", std::nullopt, words("a", 6), 6}};
    ScriptedLlmClient inner({"S1"});
    RecordingLlmClient llm(inner);
    auto record = summarize_refine(one, "What?", "q1", cfg, s.ctx, llm);
    CHECK(record.llm_calls == 1);
    CHECK(llm.requests()[0].tag == "refine_init");
  }

  SUBCASE("low_to_high processes the reversed ranking") {
    std::vector<Document> docs = {Document{"dA", std::nullopt, words("a", 6), 6},
                                  Document{"dB", std::nullopt, words("b", 6), 6}};
    cfg.order = RefineOrder::low_to_high;
    ScriptedLlmClient inner({"S1", "S2"});
    RecordingLlmClient llm(inner);
    auto record = summarize_refine(docs, "What?", "q1", cfg, s.ctx, llm);
    CHECK(record.docs_used == std::vector<std::string>{"dB", "dA"});
    CHECK(record.strategy == "refine_l2h");
    REQUIRE(llm.requests().size() == 2);
    CHECK(llm.requests()[0].user.find("b0") != std::string::npos);
    CHECK(llm.requests()[1].user.find("a0") != std::string::npos);
    CHECK(llm.requests()[1].user.find("S1") != std::string::npos);  // interim summary
    CHECK(llm.requests()[1].tag == "refine_step");
  }

  SUBCASE("H2L and L2H traces are exact reverses") {
    auto docs = three_docs();
    cfg.order = RefineOrder::high_to_low;
    ScriptedLlmClient inner_h({"S1", "S2", "S3"});
    RecordingLlmClient llm_h(inner_h);
    auto h2l = summarize_refine(docs, "What?", "q1", cfg, s.ctx, llm_h);

    cfg.order = RefineOrder::low_to_high;
    ScriptedLlmClient inner_l({"S1", "S2", "S3"});
    RecordingLlmClient llm_l(inner_l);
    auto l2h = summarize_refine(docs, "What?", "q1", cfg, s.ctx, llm_l);

    CHECK(h2l.llm_calls == 3);
    CHECK(l2h.llm_calls == 3);
    auto reversed = l2h.docs_used;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(h2l.docs_used == reversed);
  }

  SUBCASE("interim summary exceeding the budget is an error") {
    cfg.context_budget = 3;
    cfg.order = RefineOrder::high_to_low;
    std::vector<Document> docs = {Document{"dA", std::nullopt, words("a", 6), 6},
                                  Document{"dB", std::nullopt, words("b", 6), 6}};
    ScriptedLlmClient llm({"w1 w2 w3 w4"});  // 4-token interim > 3-token budget
    CHECK_THROWS_WITH_AS(summarize_refine(docs, "What?", "q1", cfg, s.ctx, llm),
                         doctest::Contains("budget"), UsageError);
  }

  SUBCASE("later doc budget shrinks by the interim summary size") {
    cfg.context_budget = 10;
    cfg.order = RefineOrder::high_to_low;
    std::vector<Document> docs = {Document{"dA", std::nullopt, words("a", 6), 6},
                                  Document{"dB", std::nullopt, words("b", 9), 9}};
    ScriptedLlmClient inner({words("s", 4), "FINAL"});  // interim has 4 tokens
    RecordingLlmClient llm(inner);
    summarize_refine(docs, "What?", "q1", cfg, s.ctx, llm);
    // second step gets 10 - 4 = 6 tokens of dB
    const std::string& step = llm.requests()[1].user;
    CHECK(step.find("b0 b1 b2 b3 b4 b5") != std::string::npos);
    CHECK(step.find("b6") == std::string::npos);
  }
}

TEST_CASE("strategy dispatch and determinism with a scripted mock") {
  Setup s;
  StrategyConfig cfg;
  cfg.strategy = Strategy::truncate_one;
  cfg.context_budget = 9;
  auto run_once = [&] {
    ScriptedLlmClient llm({"OUT"});
    return summarize(three_docs(), "What?", "q1", cfg, s.ctx, llm);
  };
  auto a = run_once();
  auto b = run_once();
  CHECK(a.summary == b.summary);
  CHECK(a.docs_used == b.docs_used);
  CHECK(a.strategy == "truncate_one");
}

TEST_CASE("summaries JSONL round-trip") {
  std::vector<SummaryRecord> records = {
      SummaryRecord{"q1", "refine_h2l", "bm25", "the summary", 3, {"d2", "d1"}}};
  std::string jsonl = summaries_to_jsonl(records);
  CHECK(jsonl.find("\"query_id\":\"q1\"") != std::string::npos);
  auto path = (std::filesystem::temp_directory_path() / "odmds_summaries.jsonl").string();
  write_summaries(records, path);
  auto loaded = load_summaries(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].strategy == "refine_h2l");
  CHECK(loaded[0].docs_used == records[0].docs_used);
  CHECK(loaded[0].llm_calls == 3);
}
