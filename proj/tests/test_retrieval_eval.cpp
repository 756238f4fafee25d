#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "odmds/errors.hpp"
#include "odmds/retrieval_eval.hpp"
#include "oracles.hpp"

using namespace odmds;

namespace {

GoldSet gold_of(std::initializer_list<const char*> ids) {
  GoldSet g;
  for (const char* id : ids) g.insert(id);
  return g;
}

struct RandomInstance {
  std::vector<std::string> ranked;
  GoldSet gold;
  std::set<std::string> gold_sorted;
  int k = 1;
};

RandomInstance random_instance(std::mt19937& rng) {
  std::uniform_int_distribution<int> n_docs_dist(0, 10);
  std::uniform_int_distribution<int> k_dist(1, 10);
  std::uniform_int_distribution<int> flip(0, 1);
  RandomInstance inst;
  int n = n_docs_dist(rng);
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back("d" + std::to_string(i));
  std::shuffle(pool.begin(), pool.end(), rng);
  inst.ranked.assign(pool.begin(), pool.begin() + n);
  for (int i = 0; i < 10; ++i) {
    if (flip(rng)) {
      inst.gold.insert("d" + std::to_string(i));
      inst.gold_sorted.insert("d" + std::to_string(i));
    }
  }
  if (inst.gold.empty()) {
    inst.gold.insert("d0");
    inst.gold_sorted.insert("d0");
  }
  inst.k = k_dist(rng);
  return inst;
}

}  // namespace

TEST_CASE("precision_at_k definition cases") {
  CHECK(precision_at_k({"d1", "d2", "d3"}, gold_of({"d1", "d3"}), 3) == doctest::Approx(2.0 / 3));
  CHECK(precision_at_k({"d1"}, gold_of({"d1", "d3"}), 3) == doctest::Approx(1.0 / 3));
  CHECK(precision_at_k({"d1", "d3"}, gold_of({"d1", "d3", "d4"}), 2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(precision_at_k({"d1"}, {}, 3), std::invalid_argument);
}

TEST_CASE("recall_at_k definition cases") {
  CHECK(recall_at_k({"d1", "d2", "d3"}, gold_of({"d1", "d3", "d4", "d5"}), 3) ==
        doctest::Approx(0.5));
  CHECK(recall_at_k({"d1", "d3", "d2"}, gold_of({"d1", "d3"}), 3) == doctest::Approx(1.0));
  CHECK(recall_at_k({"d7", "d8"}, gold_of({"d1"}), 2) == doctest::Approx(0.0));
}

TEST_CASE("ndcg hand-worked example") {
  // (1/log2(2) + 1/log2(4)) / (1/log2(2) + 1/log2(3)) = 1.5/1.630930
  CHECK(ndcg_at_k({"d1", "d2", "d3"}, gold_of({"d1", "d3"}), 3) ==
        doctest::Approx(0.9197207891481876).epsilon(1e-9));
  CHECK(ndcg_at_k({"d1", "d3", "d2"}, gold_of({"d1", "d3"}), 3) == doctest::Approx(1.0));
  CHECK(ndcg_at_k({"d7", "d8", "d9"}, gold_of({"d1"}), 3) == doctest::Approx(0.0));
}

TEST_CASE("average precision hand-worked example") {
  CHECK(average_precision({"d2", "d1", "d3"}, gold_of({"d1", "d3"})) ==
        doctest::Approx(0.5833333333333333).epsilon(1e-9));
  CHECK(average_precision({"d1", "d3", "d9"}, gold_of({"d1", "d3"})) == doctest::Approx(1.0));
  CHECK(average_precision({"d9", "d8"}, gold_of({"d1", "d3"})) == doctest::Approx(0.0));
}

TEST_CASE("metric oracle suite: 200 randomized instances") {
  std::mt19937 rng(2024);
  for (int iter = 0; iter < 200; ++iter) {
    RandomInstance inst = random_instance(rng);
    CHECK(std::abs(precision_at_k(inst.ranked, inst.gold, inst.k) -
                   oracle::precision_at_k(inst.ranked, inst.gold_sorted, inst.k)) <= 1e-9);
    CHECK(std::abs(recall_at_k(inst.ranked, inst.gold, inst.k) -
                   oracle::recall_at_k(inst.ranked, inst.gold_sorted, inst.k)) <= 1e-9);
    CHECK(std::abs(ndcg_at_k(inst.ranked, inst.gold, inst.k) -
                   oracle::ndcg_at_k(inst.ranked, inst.gold_sorted, inst.k)) <= 1e-9);
    CHECK(std::abs(average_precision(inst.ranked, inst.gold) -
                   oracle::average_precision(inst.ranked, inst.gold_sorted)) <= 1e-9);
  }
}

TEST_CASE("integer consistency: P@K*k == R@K*|gold| == hits") {
  std::mt19937 rng(5);
  for (int iter = 0; iter < 100; ++iter) {
    RandomInstance inst = random_instance(rng);
    double p = precision_at_k(inst.ranked, inst.gold, inst.k);
    double r = recall_at_k(inst.ranked, inst.gold, inst.k);
    double hits_p = p * inst.k;
    double hits_r = r * static_cast<double>(inst.gold.size());
    CHECK(std::abs(hits_p - std::round(hits_p)) <= 1e-9);
    CHECK(std::abs(hits_p - hits_r) <= 1e-9);
  }
}

TEST_CASE("swapping a non-relevant doc above a relevant one never decreases NDCG or AP") {
  std::mt19937 rng(6);
  for (int iter = 0; iter < 100; ++iter) {
    RandomInstance inst = random_instance(rng);
    for (std::size_t i = 0; i + 1 < inst.ranked.size(); ++i) {
      if (!inst.gold.count(inst.ranked[i]) && inst.gold.count(inst.ranked[i + 1])) {
        auto swapped = inst.ranked;
        std::swap(swapped[i], swapped[i + 1]);
        CHECK(ndcg_at_k(swapped, inst.gold, inst.k) >=
              ndcg_at_k(inst.ranked, inst.gold, inst.k) - 1e-12);
        CHECK(average_precision(swapped, inst.gold) >=
              average_precision(inst.ranked, inst.gold) - 1e-12);
      }
    }
  }
}

TEST_CASE("mean_average_precision") {
  RetrievalRun run;
  run.retriever_tag = "t";
  run.results["q1"] = {RankedDoc{"d1", 2.0, 1}};                        // AP = 1.0
  run.results["q2"] = {RankedDoc{"d9", 2.0, 1}, RankedDoc{"d1", 1.0, 2}};  // AP = 0.5
  GoldMap gold;
  gold["q1"] = {"d1"};
  gold["q2"] = {"d1"};
  CHECK(mean_average_precision(run, gold) == doctest::Approx(0.75));

  RetrievalRun single;
  single.results["q1"] = {RankedDoc{"d1", 2.0, 1}};
  CHECK(mean_average_precision(single, gold) == doctest::Approx(1.0));

  RetrievalRun unknown;
  unknown.results["nope"] = {RankedDoc{"d1", 2.0, 1}};
  CHECK_THROWS_WITH_AS(mean_average_precision(unknown, gold), doctest::Contains("nope"),
                       DataError);
}

TEST_CASE("metrics read ranks only: invariant under monotone score changes") {
  // same ranked ids with different score scales feed evaluate_run identically
  RetrievalRun a, b;
  a.retriever_tag = b.retriever_tag = "t";
  a.results["q1"] = {RankedDoc{"d1", 100.0, 1}, RankedDoc{"d2", 50.0, 2}};
  b.results["q1"] = {RankedDoc{"d1", 0.9, 1}, RankedDoc{"d2", 0.1, 2}};
  GoldMap gold;
  gold["q1"] = {"d2"};
  auto ra = evaluate_run(a, gold, 2);
  auto rb = evaluate_run(b, gold, 2);
  CHECK(ra.ndcg == rb.ndcg);
  CHECK(ra.map == rb.map);
}

TEST_CASE("derive_topk min/mean/max and banker's rounding") {
  auto make_query = [](int golds) {
    QueryInstance q;
    q.query_id = "q" + std::to_string(golds);
    q.query = "x";
    for (int i = 0; i < golds; ++i) q.gold_doc_ids.push_back("d" + std::to_string(i));
    q.references = {"r"};
    return q;
  };
  auto simple = derive_topk({make_query(1), make_query(2), make_query(3)});
  CHECK(simple.min.k == 1);
  CHECK(simple.mean.k == 2);
  CHECK(simple.max.k == 3);

  // mean 2.5 rounds half-to-even to 2
  auto half = derive_topk({make_query(2), make_query(3)});
  CHECK(half.mean.k == 2);
  // mean 3.5 rounds half-to-even to 4
  auto half_up = derive_topk({make_query(3), make_query(4)});
  CHECK(half_up.mean.k == 4);

  // the story-style distribution: counts 3..10 with mean 8 reproduce min(3)/mean(8)/max(10)
  std::vector<QueryInstance> story;
  for (int c : {3, 10, 10, 9, 8, 8, 8, 8}) story.push_back(make_query(c));
  auto topk = derive_topk(story);
  CHECK(topk.min.k == 3);
  CHECK(topk.mean.k == 8);
  CHECK(topk.max.k == 10);
}

TEST_CASE("evaluate_run composes per-query metrics") {
  GoldMap gold;
  gold["q1"] = {"d1", "d3"};
  RetrievalRun run;
  run.retriever_tag = "bm25";
  run.results["q1"] = {RankedDoc{"d1", 3.0, 1}, RankedDoc{"d2", 2.0, 2}, RankedDoc{"d3", 1.0, 3}};

  auto row = evaluate_run(run, gold, 3);
  // P@3 = 2/3, R@3 = 1, NDCG = 0.919721, AP = (1 + 2/3)/2 = 0.833333
  CHECK(row.p_at_k == doctest::Approx(66.67));
  CHECK(row.r_at_k == doctest::Approx(100.00));
  CHECK(row.ndcg == doctest::Approx(91.97));
  CHECK(row.map == doctest::Approx(83.33));
  CHECK(row.per_query.at("q1").ap == doctest::Approx(5.0 / 6).epsilon(1e-9));

  // a perfect run scores 100 across the board when k <= |gold|
  RetrievalRun perfect;
  perfect.retriever_tag = "bm25";
  perfect.results["q1"] = {RankedDoc{"d1", 3.0, 1}, RankedDoc{"d3", 2.0, 2}};
  auto perfect_row = evaluate_run(perfect, gold, 2);
  CHECK(perfect_row.p_at_k == doctest::Approx(100.0));
  CHECK(perfect_row.r_at_k == doctest::Approx(100.0));
  CHECK(perfect_row.ndcg == doctest::Approx(100.0));
  CHECK(perfect_row.map == doctest::Approx(100.0));

  // a query the retriever returned nothing for scores 0, not skipped
  GoldMap two;
  two["q1"] = {"d1"};
  two["q2"] = {"d2"};
  RetrievalRun partial;
  partial.retriever_tag = "bm25";
  partial.results["q1"] = {RankedDoc{"d1", 1.0, 1}};
  auto partial_row = evaluate_run(partial, two, 1);
  CHECK(partial_row.p_at_k == doctest::Approx(50.0));
  CHECK(partial_row.per_query.at("q2").ap == doctest::Approx(0.0));

  RetrievalRun stray;
  stray.retriever_tag = "bm25";
  stray.results["zz"] = {RankedDoc{"d1", 1.0, 1}};
  CHECK_THROWS_WITH_AS(evaluate_run(stray, two, 1), doctest::Contains("zz"), DataError);
}

TEST_CASE("report JSON and table render") {
  GoldMap gold;
  gold["q1"] = {"d1"};
  RetrievalRun run;
  run.retriever_tag = "bm25";
  run.results["q1"] = {RankedDoc{"d1", 1.0, 1}};
  auto row = evaluate_run(run, gold, 1);
  row.strategy_name = "min";
  auto obj = retrieval_report_to_json("fixture", {row});
  CHECK(obj["dataset"] == "fixture");
  CHECK(obj["rows"][0]["metrics"]["p_at_k"] == doctest::Approx(100.0));
  std::string table = render_retrieval_table({row});
  CHECK(table.find("min(1)") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
}
