#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "odmds/corpus.hpp"
#include "odmds/errors.hpp"
#include "odmds/jsonl.hpp"
#include "odmds/tokenizer.hpp"

using namespace odmds;

namespace {

TokenizerConfig ws_cfg() { return TokenizerConfig{}; }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string random_text(std::mt19937& rng, int max_tokens) {
  static const char* words[] = {"alpha", "beta",  "gamma", "delta", "cat",
                                "dog",   "tree",  "Moon!", "sun,",  "a"};
  std::uniform_int_distribution<int> count(0, max_tokens);
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  int n = count(rng);
  std::string text;
  for (int i = 0; i < n; ++i) {
    if (!text.empty()) text += ' ';
    text += words[pick(rng)];
  }
  return text;
}

}  // namespace

TEST_CASE("whitespace tokenizer strips punctuation and lowercases") {
  auto cfg = ws_cfg();
  CHECK(tokenize("The cat, sat.", cfg) == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tokenize("", cfg).empty());
  CHECK(tokenize("A  B\tA", cfg) == std::vector<std::string>{"a", "b", "a"});
  CHECK(tokenize("!!!", cfg).empty());
  CHECK(tokenize("don't stop-me", cfg) == std::vector<std::string>{"don't", "stop-me"});
}

TEST_CASE("unicode-word mode splits on punctuation and keeps UTF-8 runs") {
  TokenizerConfig cfg;
  cfg.mode = TokenizerMode::unicode_word;
  CHECK(tokenize("ab,cd", cfg) == std::vector<std::string>{"ab", "cd"});
  CHECK(tokenize("caf\xc3\xa9 bar", cfg) == std::vector<std::string>{"caf\xc3\xa9", "bar"});
}

TEST_CASE("tokenize is deterministic") {
  auto cfg = ws_cfg();
  std::string text = "Some: text, with; punctuation!  and   spacing.";
  CHECK(tokenize(text, cfg) == tokenize(text, cfg));
}

TEST_CASE("truncate_to_budget") {
  auto cfg = ws_cfg();
  std::string text = "one two three four five six seven eight nine ten";
  CHECK(tokenize(truncate_to_budget(text, 5, cfg), cfg) ==
        std::vector<std::string>{"one", "two", "three", "four", "five"});
  CHECK(truncate_to_budget("a b c", 100, cfg) == "a b c");
  CHECK(truncate_to_budget(text, 0, cfg) == "");
}

TEST_CASE("truncation prefix property on random texts") {
  auto cfg = ws_cfg();
  std::mt19937 rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    std::string text = random_text(rng, 20);
    auto full = tokenize(text, cfg);
    std::uniform_int_distribution<std::int64_t> pick_budget(0, 25);
    std::int64_t budget = pick_budget(rng);
    auto prefix = tokenize(truncate_to_budget(text, budget, cfg), cfg);
    std::size_t want =
        std::min<std::size_t>(static_cast<std::size_t>(budget), full.size());
    REQUIRE(prefix.size() == want);
    for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i] == full[i]);
  }
}

TEST_CASE("chunk_text spans and sizes") {
  auto cfg = ws_cfg();
  std::string text = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9";

  auto chunks = chunk_text(text, 4, 0, cfg);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].token_begin == 0);
  CHECK(chunks[0].token_end == 4);
  CHECK(chunks[1].token_begin == 4);
  CHECK(chunks[1].token_end == 8);
  CHECK(chunks[2].token_begin == 8);
  CHECK(chunks[2].token_end == 10);

  auto one = chunk_text("a b c d", 10, 0, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one[0].text == "a b c d");

  auto overlapping = chunk_text(text, 4, 1, cfg);
  REQUIRE(overlapping.size() == 3);
  CHECK(overlapping[0].token_begin == 0);
  CHECK(overlapping[0].token_end == 4);
  CHECK(overlapping[1].token_begin == 3);
  CHECK(overlapping[1].token_end == 7);
  CHECK(overlapping[2].token_begin == 6);
  CHECK(overlapping[2].token_end == 10);

  CHECK_THROWS_AS(chunk_text(text, 4, 4, cfg), std::invalid_argument);
}

TEST_CASE("chunk coverage property on random inputs") {
  auto cfg = ws_cfg();
  std::mt19937 rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    std::string text = random_text(rng, 30);
    auto full = tokenize(text, cfg);
    std::uniform_int_distribution<std::int64_t> pick_budget(1, 8);
    std::int64_t budget = pick_budget(rng);
    std::uniform_int_distribution<std::int64_t> pick_overlap(0, budget - 1);
    std::int64_t overlap = pick_overlap(rng);
    auto chunks = chunk_text(text, budget, overlap, cfg);
    if (full.empty()) {
      CHECK(chunks.empty());
      continue;
    }
    // every chunk within budget, consecutive chunks share exactly `overlap`
    // tokens, and deduplicated concatenation equals the full sequence
    std::vector<std::string> rebuilt;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      const Chunk& chunk = chunks[c];
      auto chunk_tokens = tokenize(chunk.text, cfg);
      REQUIRE(chunk_tokens.size() == chunk.token_end - chunk.token_begin);
      CHECK(chunk_tokens.size() <= static_cast<std::size_t>(budget));
      if (c + 1 < chunks.size()) {
        CHECK(chunks[c].token_end - chunks[c + 1].token_begin ==
              static_cast<std::size_t>(overlap));
      }
      std::size_t skip = c == 0 ? 0 : static_cast<std::size_t>(overlap);
      rebuilt.insert(rebuilt.end(), chunk_tokens.begin() + static_cast<std::ptrdiff_t>(skip),
                     chunk_tokens.end());
    }
    CHECK(rebuilt == full);
  }
}

TEST_CASE("load_corpus happy path keeps file order and counts tokens") {
  auto path = temp_path("odmds_corpus_ok.jsonl");
  write_text(path,
             "{\"doc_id\":\"d1\",\"title\":\"T1\",\"text\":\"a b a\"}\n"
             "{\"doc_id\":\"d2\",\"title\":null,\"text\":\"b c\"}\n");
  Corpus corpus = load_corpus(path, ws_cfg());
  REQUIRE(corpus.size() == 2);
  CHECK(corpus.documents()[0].doc_id == "d1");
  CHECK(corpus.documents()[0].token_count == 3);
  CHECK(corpus.documents()[1].doc_id == "d2");
  CHECK(!corpus.documents()[1].title.has_value());
}

TEST_CASE("load_corpus errors name the line") {
  auto dup = temp_path("odmds_corpus_dup.jsonl");
  write_text(dup,
             "{\"doc_id\":\"d1\",\"title\":null,\"text\":\"a\"}\n"
             "{\"doc_id\":\"d2\",\"title\":null,\"text\":\"b\"}\n"
             "{\"doc_id\":\"d1\",\"title\":null,\"text\":\"c\"}\n");
  CHECK_THROWS_WITH_AS(load_corpus(dup, ws_cfg()),
                       doctest::Contains("duplicate doc_id \"d1\""), DataError);
  CHECK_THROWS_WITH_AS(load_corpus(dup, ws_cfg()), doctest::Contains(":3"), DataError);

  auto bad = temp_path("odmds_corpus_bad.jsonl");
  write_text(bad, "{\"doc_id\":\"d1\",\"title\":null,\"text\":\"a\"}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_corpus(bad, ws_cfg()), doctest::Contains(":2"), DataError);

  auto empty_text = temp_path("odmds_corpus_empty_text.jsonl");
  write_text(empty_text, "{\"doc_id\":\"d1\",\"title\":null,\"text\":\"\"}\n");
  CHECK_THROWS_AS(load_corpus(empty_text, ws_cfg()), DataError);
}

TEST_CASE("empty corpus file is valid") {
  auto path = temp_path("odmds_corpus_empty.jsonl");
  write_text(path, "");
  CHECK(load_corpus(path, ws_cfg()).size() == 0);
}

TEST_CASE("corpus round-trip is byte-identical") {
  auto path = temp_path("odmds_corpus_rt.jsonl");
  Corpus original(
      {
          Document{"d1", std::nullopt, "plain text", 0},
          Document{"d2", "A title", "text with \"quotes\" and \xe2\x98\x83 unicode", 0},
      },
      ws_cfg());
  write_corpus(original, path);
  std::string first = read_file(path);
  Corpus reloaded = load_corpus(path, ws_cfg());
  CHECK(corpus_to_jsonl(reloaded) == first);
}

TEST_CASE("load_queries validates shape and gold resolution") {
  auto path = temp_path("odmds_queries.jsonl");
  write_text(path,
             "{\"query_id\":\"q1\",\"query\":\"what\",\"gold_doc_ids\":[\"d1\"],"
             "\"references\":[\"r\"]}\n");
  auto queries = load_queries(path);
  REQUIRE(queries.size() == 1);
  CHECK(queries[0].gold_doc_ids == std::vector<std::string>{"d1"});

  Corpus corpus({Document{"d1", std::nullopt, "x", 0}}, ws_cfg());
  CHECK_NOTHROW(load_queries(path, corpus));
  Corpus other({Document{"other", std::nullopt, "x", 0}}, ws_cfg());
  CHECK_THROWS_WITH_AS(load_queries(path, other), doctest::Contains("d1"), DataError);

  auto no_refs = temp_path("odmds_queries_norefs.jsonl");
  write_text(no_refs,
             "{\"query_id\":\"q1\",\"query\":\"what\",\"gold_doc_ids\":[\"d1\"],"
             "\"references\":[]}\n");
  CHECK_THROWS_AS(load_queries(no_refs), DataError);

  auto no_gold = temp_path("odmds_queries_nogold.jsonl");
  write_text(no_gold,
             "{\"query_id\":\"q1\",\"query\":\"what\",\"gold_doc_ids\":[],"
             "\"references\":[\"r\"]}\n");
  CHECK_THROWS_AS(load_queries(no_gold), DataError);
}
