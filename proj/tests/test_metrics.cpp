#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "disco/corpus.hpp"
#include "disco/metrics.hpp"
#include "disco/rng.hpp"
#include "oracles.hpp"

using namespace disco;

namespace {

LabelSpace ordinal_space(std::size_t c, double first = 0.0, double step = 1.0) {
  LabelSpace ls;
  for (std::size_t k = 0; k < c; ++k) {
    ls.labels.push_back("L" + std::to_string(k));
    ls.values.push_back(first + step * double(k));
  }
  ls.ordinal = true;
  return ls;
}

const char* kEvalCorpus = R"({
  "label_space": {"labels": ["1", "2", "3", "4", "5", "6"],
                  "values": [1, 2, 3, 4, 5, 6], "ordinal": true},
  "items": {
    "t1": {"text": {"t": "a"}, "split": "train",
           "annotations": {"a1": "2", "a2": "2", "a3": "3"}},
    "t2": {"text": {"t": "b"}, "split": "train",
           "annotations": {"a1": "2", "a2": "5"}},
    "e1": {"text": {"t": "c"}, "split": "test",
           "annotations": {"a1": "1", "a2": "2"}},
    "e2": {"text": {"t": "d"}, "split": "test",
           "annotations": {"a2": "6", "a3": "6"}}
  }
})";

}  // namespace

TEST_CASE("manhattan basics and oracle") {
  CHECK(manhattan({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(manhattan({1.0, 0.0}, {0.0, 1.0}) == 2.0);
  CHECK_THROWS_AS(manhattan({0.5, 0.5}, {1.0}), std::invalid_argument);

  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const std::size_t c = 2 + rng.uniform_index(7);
    const Vec p = oracle::random_simplex(rng, c);
    const Vec q = oracle::random_simplex(rng, c);
    CHECK(manhattan(p, q) ==
          doctest::Approx(oracle::manhattan_bruteforce(p, q)).epsilon(1e-12));
    CHECK(manhattan(p, q) >= 0.0);
    CHECK(manhattan(p, q) <= 2.0);
    CHECK(manhattan(p, q) == manhattan(q, p));
  }
}

TEST_CASE("wasserstein point masses and symmetry") {
  const auto par = ordinal_space(11, -5.0);  // -5..+5
  Vec lo(11, 0.0), hi(11, 0.0);
  lo[0] = 1.0;
  hi[10] = 1.0;
  CHECK(wasserstein1(lo, hi, par) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(wasserstein1(hi, lo, par) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(wasserstein1(lo, lo, par) == 0.0);

  const auto csc = ordinal_space(6, 1.0);
  Vec one(6, 0.0), six(6, 0.0);
  one[0] = 1.0;
  six[5] = 1.0;
  CHECK(wasserstein1(one, six, csc) == doctest::Approx(5.0).epsilon(1e-12));

  LabelSpace cat = csc;
  cat.ordinal = false;
  CHECK_THROWS(wasserstein1(one, six, cat));
}

TEST_CASE("wasserstein equals brute-force optimal transport on 500 random pairs") {
  Rng rng(31337);
  for (int i = 0; i < 500; ++i) {
    const std::size_t c = 2 + rng.uniform_index(4);  // C in {2..5}
    // non-uniform spacing exercises the value-scale weighting
    LabelSpace ls;
    double v = -2.0;
    for (std::size_t k = 0; k < c; ++k) {
      ls.labels.push_back("L" + std::to_string(k));
      ls.values.push_back(v);
      v += 0.5 + 2.0 * rng.uniform01();
    }
    ls.ordinal = true;
    const Vec p = oracle::random_simplex(rng, c);
    const Vec q = oracle::random_simplex(rng, c);

    const double cdf_formula = wasserstein1(p, q, ls);
    const double dual = oracle::wasserstein_dual_bruteforce(p, q, ls.values);
    const double plan = oracle::wasserstein_greedy_plan_cost(p, q, ls.values);
    // dual <= optimum <= any feasible plan; all three must agree
    CHECK(std::fabs(cdf_formula - dual) < 1e-6);
    CHECK(std::fabs(cdf_formula - plan) < 1e-6);
  }
}

TEST_CASE("metric properties: triangle inequality on random triples") {
  Rng rng(99);
  const auto ls = ordinal_space(5, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Vec p = oracle::random_simplex(rng, 5);
    const Vec q = oracle::random_simplex(rng, 5);
    const Vec r = oracle::random_simplex(rng, 5);
    CHECK(manhattan(p, r) <= manhattan(p, q) + manhattan(q, r) + 1e-12);
    CHECK(wasserstein1(p, r, ls) <=
          wasserstein1(p, q, ls) + wasserstein1(q, r, ls) + 1e-12);
  }
}

TEST_CASE("error rate") {
  PairLabels golds{{"i1", {{"a", 0}, {"b", 1}}}, {"i2", {{"a", 2}, {"b", 0}}}};
  PairLabels perfect = golds;
  CHECK(error_rate(perfect, golds) == 0.0);

  PairLabels wrong{{"i1", {{"a", 1}, {"b", 0}}}, {"i2", {{"a", 0}, {"b", 2}}}};
  CHECK(error_rate(wrong, golds) == 1.0);

  PairLabels three_quarters = golds;
  three_quarters["i1"]["a"] = 9;
  CHECK(error_rate(three_quarters, golds) == doctest::Approx(0.25));

  PairLabels missing{{"i1", {{"a", 0}}}};
  CHECK_THROWS_WITH_AS(error_rate(missing, golds), doctest::Contains("missing prediction"),
                       std::runtime_error);
}

TEST_CASE("error rate matches brute-force count on random labels") {
  Rng rng(2);
  PairLabels golds, preds;
  std::size_t mismatches = 0, total = 0;
  for (int i = 0; i < 60; ++i) {
    const std::string item = "i" + std::to_string(i);
    for (int a = 0; a < 4; ++a) {
      const std::string annot = "a" + std::to_string(a);
      const std::size_t g = rng.uniform_index(5);
      const std::size_t p = rng.uniform_index(5);
      golds[item][annot] = g;
      preds[item][annot] = p;
      if (g != p) ++mismatches;
      ++total;
    }
  }
  CHECK(error_rate(preds, golds) ==
        doctest::Approx(double(mismatches) / double(total)).epsilon(1e-12));
}

TEST_CASE("absolute distance") {
  const auto csc = ordinal_space(6, 1.0);
  PairLabels golds{{"i1", {{"a", 5}}}};  // gold label value 6
  PairLabels pred_lo{{"i1", {{"a", 0}}}};  // predicted value 1
  CHECK(absolute_distance(pred_lo, golds, csc, false) == doctest::Approx(5.0));
  CHECK(absolute_distance(pred_lo, golds, csc, true) == doctest::Approx(1.0));
  CHECK(absolute_distance(golds, golds, csc, true) == 0.0);

  LabelSpace cat = csc;
  cat.ordinal = false;
  CHECK_THROWS(absolute_distance(pred_lo, golds, cat, true));
}

TEST_CASE("absolute distance matches brute-force recompute on 1000 random pairs") {
  Rng rng(3);
  const auto ls = ordinal_space(8, -3.0, 1.5);
  PairLabels golds, preds;
  double sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::string item = "i" + std::to_string(i);
    const std::size_t g = rng.uniform_index(8);
    const std::size_t p = rng.uniform_index(8);
    golds[item]["a"] = g;
    preds[item]["a"] = p;
    sum += std::fabs(ls.values[p] - ls.values[g]);
  }
  CHECK(absolute_distance(preds, golds, ls, false) ==
        doctest::Approx(sum / 1000.0).epsilon(1e-12));
  CHECK(absolute_distance(preds, golds, ls, true) ==
        doctest::Approx(sum / 1000.0 / ls.range()).epsilon(1e-12));
}

TEST_CASE("most-frequent baseline") {
  const auto ds = parse_dataset(kEvalCorpus);
  const auto train = split_view(ds, Split::train);
  const auto test = split_view(ds, Split::test);
  const auto preds = baseline_most_frequent(train, test);
  // train labels: 2,2,3,2,5 -> modal "2" (index 1)
  for (const auto& [item, dist] : preds.soft) {
    CHECK(dist[1] == 1.0);
  }
  for (const auto& [item, by_annot] : preds.perspectivist)
    for (const auto& [annot, label] : by_annot) CHECK(label == 1);
  CHECK(preds.perspectivist.at("e1").size() == 2);
}

TEST_CASE("most-frequent baseline breaks ties toward the lower label") {
  const char* text = R"({
    "label_space": {"labels": ["0", "1"], "ordinal": false},
    "items": {
      "i1": {"text": {"t": "x"}, "split": "train", "annotations": {"a": "1", "b": "0"}},
      "i2": {"text": {"t": "y"}, "split": "train", "annotations": {"a": "0", "b": "1"}}
    }
  })";
  const auto ds = parse_dataset(text);
  const auto preds = baseline_most_frequent(ds, ds);
  CHECK(preds.soft.at("i1")[0] == 1.0);
}

TEST_CASE("random baseline is uniform, seeded, and near-chance on balanced golds") {
  const auto ds = parse_dataset(kEvalCorpus);
  const auto test = split_view(ds, Split::test);
  const auto p1 = baseline_random(test, 11);
  const auto p2 = baseline_random(test, 11);
  const auto p3 = baseline_random(test, 12);
  for (const auto& [item, dist] : p1.soft)
    for (double v : dist) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p1.perspectivist == p2.perspectivist);
  CHECK(p1.perspectivist != p3.perspectivist);

  // statistical: error rate about 1 - 1/C within 3 sigma on a big balanced corpus
  Rng rng(5);
  PairLabels golds;
  const std::size_t c = 4, pairs = 4000;
  AnnotationDataset big;
  big.label_space.labels = {"0", "1", "2", "3"};
  big.label_space.values = {0, 1, 2, 3};
  for (std::size_t i = 0; i < pairs; ++i) {
    Item it;
    it.item_id = "i" + std::to_string(i);
    it.text_fields["t"] = "x";
    it.split = Split::test;
    big.items.push_back(it);
    big.records.push_back(Record{i, 0, rng.uniform_index(c)});
  }
  big.annotators.push_back(Annotator{"a", 0, {}});
  const auto rnd = baseline_random(big, 777);
  const double er = error_rate(rnd.perspectivist, gold_pair_labels(big));
  const double expect = 1.0 - 1.0 / double(c);
  const double sigma = std::sqrt(expect * (1.0 - expect) / double(pairs));
  CHECK(std::fabs(er - expect) < 3.0 * sigma);
}

TEST_CASE("evaluate: oracle predictor scores zero on both tasks") {
  const auto ds = parse_dataset(kEvalCorpus);
  const auto test = split_view(ds, Split::test);

  PredictionSet oracle_preds;
  const auto hists = item_histograms(test);
  for (std::size_t m = 0; m < test.num_items(); ++m)
    oracle_preds.soft[test.items[m].item_id] = hists[m].probs;
  oracle_preds.perspectivist = gold_pair_labels(test);

  for (SoftMetric sm : {SoftMetric::manhattan, SoftMetric::wasserstein}) {
    for (PerspectivistMetric pm :
         {PerspectivistMetric::error_rate, PerspectivistMetric::abs_distance}) {
      EvalConfig cfg;
      cfg.soft = sm;
      cfg.pe = pm;
      const auto report = evaluate(oracle_preds, test, cfg);
      CHECK(report.task_a_mean == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(report.task_b_mean == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluate: task A mean equals hand-averaged per-item distances") {
  const auto ds = parse_dataset(kEvalCorpus);
  const auto test = split_view(ds, Split::test);
  PredictionSet preds;
  Vec guess{0.3, 0.1, 0.1, 0.1, 0.1, 0.3};
  for (const auto& it : test.items) preds.soft[it.item_id] = guess;
  preds.perspectivist = gold_pair_labels(test);

  EvalConfig cfg;
  cfg.soft = SoftMetric::manhattan;
  cfg.pe = PerspectivistMetric::error_rate;
  const auto report = evaluate(preds, test, cfg);
  const auto hists = item_histograms(test);
  double sum = 0.0;
  for (std::size_t m = 0; m < test.num_items(); ++m)
    sum += oracle::manhattan_bruteforce(guess, hists[m].probs);
  CHECK(report.task_a_mean == doctest::Approx(sum / 2.0).epsilon(1e-12));
  CHECK(report.task_a_per_item.size() == 2);

  // coverage gap is an error
  preds.soft.erase("e1");
  CHECK_THROWS_WITH_AS(evaluate(preds, test, cfg),
                       doctest::Contains("no soft prediction"), std::runtime_error);
}

TEST_CASE("score report JSON shape") {
  ScoreReport r;
  r.task_a_metric = "manhattan";
  r.task_a_mean = 0.5;
  r.task_a_per_item = {{"x", 0.5}};
  r.task_a_items = 1;
  r.task_b_metric = "error_rate";
  r.task_b_mean = 0.25;
  r.task_b_pairs = 4;
  const auto text = score_report_to_json(r);
  CHECK(text.find("\"task_a\"") != std::string::npos);
  CHECK(text.find("\"per_item\"") != std::string::npos);
  CHECK(text.find("\"task_b\"") != std::string::npos);
}
