#include "disco/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "disco/rng.hpp"

namespace disco {

using ojson = nlohmann::ordered_json;

double manhattan(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw std::invalid_argument("manhattan: length mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::fabs(p[k] - q[k]);
  return d;
}

double wasserstein1(const Vec& p, const Vec& q, const LabelSpace& ls) {
  if (!ls.ordinal)
    throw std::runtime_error("wasserstein distance requires an ordinal label space");
  if (p.size() != ls.size() || q.size() != ls.size())
    throw std::invalid_argument("wasserstein1: length mismatch");
  double d = 0.0;
  double cdf_p = 0.0, cdf_q = 0.0;
  for (std::size_t k = 0; k + 1 < ls.size(); ++k) {
    cdf_p += p[k];
    cdf_q += q[k];
    d += std::fabs(cdf_p - cdf_q) * (ls.values[k + 1] - ls.values[k]);
  }
  return d;
}

namespace {

std::size_t lookup_pair(const PairLabels& preds, const std::string& item_id,
                        const std::string& annot_id) {
  auto it = preds.find(item_id);
  if (it != preds.end()) {
    auto jt = it->second.find(annot_id);
    if (jt != it->second.end()) return jt->second;
  }
  throw std::runtime_error("missing prediction for item '" + item_id + "', annotator '" +
                           annot_id + "'");
}

}  // namespace

double error_rate(const PairLabels& preds, const PairLabels& golds) {
  std::size_t total = 0, wrong = 0;
  for (const auto& [item_id, by_annot] : golds) {
    for (const auto& [annot_id, gold] : by_annot) {
      ++total;
      if (lookup_pair(preds, item_id, annot_id) != gold) ++wrong;
    }
  }
  if (total == 0) throw std::runtime_error("error_rate: no gold pairs");
  return double(wrong) / double(total);
}

double absolute_distance(const PairLabels& preds, const PairLabels& golds,
                         const LabelSpace& ls, bool normalized) {
  if (!ls.ordinal)
    throw std::runtime_error("absolute distance requires an ordinal label space");
  std::size_t total = 0;
  double sum = 0.0;
  for (const auto& [item_id, by_annot] : golds) {
    for (const auto& [annot_id, gold] : by_annot) {
      const std::size_t pred = lookup_pair(preds, item_id, annot_id);
      sum += std::fabs(ls.values[pred] - ls.values[gold]);
      ++total;
    }
  }
  if (total == 0) throw std::runtime_error("absolute_distance: no gold pairs");
  double mean = sum / double(total);
  if (normalized) mean /= ls.range();
  return mean;
}

SoftMetric soft_metric_from_string(const std::string& s) {
  if (s == "manhattan") return SoftMetric::manhattan;
  if (s == "wasserstein") return SoftMetric::wasserstein;
  throw std::runtime_error("unknown soft metric: '" + s + "'");
}

PerspectivistMetric pe_metric_from_string(const std::string& s) {
  if (s == "error_rate") return PerspectivistMetric::error_rate;
  if (s == "abs_distance") return PerspectivistMetric::abs_distance;
  throw std::runtime_error("unknown perspectivist metric: '" + s + "'");
}

const char* to_string(SoftMetric m) {
  return m == SoftMetric::manhattan ? "manhattan" : "wasserstein";
}

const char* to_string(PerspectivistMetric m) {
  return m == PerspectivistMetric::error_rate ? "error_rate" : "abs_distance";
}

EvalConfig EvalConfig::for_label_space(const LabelSpace& ls) {
  EvalConfig cfg;
  if (ls.ordinal) {
    cfg.soft = SoftMetric::wasserstein;
    cfg.pe = PerspectivistMetric::abs_distance;
    cfg.normalized = true;
  } else {
    cfg.soft = SoftMetric::manhattan;
    cfg.pe = PerspectivistMetric::error_rate;
  }
  return cfg;
}

PairLabels gold_pair_labels(const AnnotationDataset& ds) {
  PairLabels golds;
  for (const auto& r : ds.records) {
    golds[ds.items[r.item].item_id][ds.annotators[r.annotator].annotator_id] = r.label;
  }
  return golds;
}

ScoreReport evaluate(const PredictionSet& preds, const AnnotationDataset& eval_ds,
                     const EvalConfig& cfg) {
  const LabelSpace& ls = eval_ds.label_space;
  ScoreReport report;
  report.task_a_metric = to_string(cfg.soft);
  report.task_b_metric = to_string(cfg.pe);
  if (cfg.pe == PerspectivistMetric::abs_distance && cfg.normalized)
    report.task_b_metric = "normalized_abs_distance";

  // Task A: items without annotations have no gold histogram and are skipped.
  const auto hists = item_histograms(eval_ds);
  double sum = 0.0;
  for (std::size_t m = 0; m < eval_ds.num_items(); ++m) {
    if (!hists[m].valid()) continue;
    const std::string& item_id = eval_ds.items[m].item_id;
    auto it = preds.soft.find(item_id);
    if (it == preds.soft.end())
      throw std::runtime_error("no soft prediction for item '" + item_id + "'");
    const double d = cfg.soft == SoftMetric::manhattan
                         ? manhattan(it->second, hists[m].probs)
                         : wasserstein1(it->second, hists[m].probs, ls);
    report.task_a_per_item[item_id] = d;
    sum += d;
    ++report.task_a_items;
  }
  if (report.task_a_items > 0) report.task_a_mean = sum / double(report.task_a_items);

  const PairLabels golds = gold_pair_labels(eval_ds);
  std::size_t pairs = 0;
  for (const auto& [item_id, by_annot] : golds) {
    (void)item_id;
    pairs += by_annot.size();
  }
  report.task_b_pairs = pairs;
  if (pairs > 0) {
    report.task_b_mean = cfg.pe == PerspectivistMetric::error_rate
                             ? error_rate(preds.perspectivist, golds)
                             : absolute_distance(preds.perspectivist, golds, ls,
                                                 cfg.normalized);
  }
  return report;
}

std::string score_report_to_json(const ScoreReport& r) {
  ojson root;
  ojson a;
  a["metric"] = r.task_a_metric;
  a["mean"] = r.task_a_mean;
  a["items"] = r.task_a_items;
  ojson per_item = ojson::object();
  for (const auto& [id, d] : r.task_a_per_item) per_item[id] = d;
  a["per_item"] = std::move(per_item);
  root["task_a"] = std::move(a);
  ojson b;
  b["metric"] = r.task_b_metric;
  b["mean"] = r.task_b_mean;
  b["pairs"] = r.task_b_pairs;
  root["task_b"] = std::move(b);
  return root.dump(2);
}

void save_score_report(const ScoreReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << score_report_to_json(r) << "\n";
}

PredictionSet baseline_most_frequent(const AnnotationDataset& train_ds,
                                     const AnnotationDataset& eval_ds) {
  if (train_ds.records.empty())
    throw std::runtime_error("baseline_most_frequent: empty train split");
  std::vector<std::size_t> counts(train_ds.num_classes(), 0);
  for (const auto& r : train_ds.records) ++counts[r.label];
  std::size_t modal = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[modal]) modal = k;  // ties keep the lower label
  }

  PredictionSet preds;
  preds.aggregation = Aggregation::expectation;
  Vec one_hot(eval_ds.num_classes(), 0.0);
  one_hot[modal] = 1.0;
  for (const auto& item : eval_ds.items) preds.soft[item.item_id] = one_hot;
  for (const auto& r : eval_ds.records) {
    preds.perspectivist[eval_ds.items[r.item].item_id]
                       [eval_ds.annotators[r.annotator].annotator_id] = modal;
  }
  return preds;
}

PredictionSet baseline_random(const AnnotationDataset& eval_ds, std::uint64_t seed) {
  PredictionSet preds;
  preds.aggregation = Aggregation::expectation;
  const std::size_t c = eval_ds.num_classes();
  const Vec uniform(c, 1.0 / double(c));
  for (const auto& item : eval_ds.items) preds.soft[item.item_id] = uniform;
  Rng rng(seed);
  for (const auto& r : eval_ds.records) {
    preds.perspectivist[eval_ds.items[r.item].item_id]
                       [eval_ds.annotators[r.annotator].annotator_id] = rng.uniform_index(c);
  }
  return preds;
}

}  // namespace disco
