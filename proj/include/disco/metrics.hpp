#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "disco/corpus.hpp"
#include "disco/predict.hpp"

namespace disco {

// L1 distance between two probability vectors; in [0, 2].
double manhattan(const Vec& p, const Vec& q);

// 1-D Wasserstein-1 between distributions placed at the label values:
// sum over k of |CDF_p(k) - CDF_q(k)| * (values[k+1] - values[k]).
// Shared by the training loss and the official metric.
double wasserstein1(const Vec& p, const Vec& q, const LabelSpace& ls);

// Fraction of gold pairs whose predicted label differs.
double error_rate(const PairLabels& preds, const PairLabels& golds);

// Mean |value(pred) - value(gold)| over gold pairs; divided by the label
// value range when normalized.
double absolute_distance(const PairLabels& preds, const PairLabels& golds,
                         const LabelSpace& ls, bool normalized);

enum class SoftMetric { manhattan, wasserstein };
enum class PerspectivistMetric { error_rate, abs_distance };

SoftMetric soft_metric_from_string(const std::string& s);
PerspectivistMetric pe_metric_from_string(const std::string& s);
const char* to_string(SoftMetric m);
const char* to_string(PerspectivistMetric m);

struct EvalConfig {
  SoftMetric soft = SoftMetric::manhattan;
  PerspectivistMetric pe = PerspectivistMetric::error_rate;
  bool normalized = true;  // abs_distance only

  // Metric pairing by label-space kind: Manhattan/error-rate for categorical
  // scales, Wasserstein/normalized-absolute-distance for ordinal ones.
  static EvalConfig for_label_space(const LabelSpace& ls);
};

struct ScoreReport {
  std::string task_a_metric;
  double task_a_mean = 0.0;
  std::map<std::string, double> task_a_per_item;
  std::string task_b_metric;
  double task_b_mean = 0.0;
  std::size_t task_a_items = 0;
  std::size_t task_b_pairs = 0;
};

// Scores predictions against the eval view: Task A against each labeled
// item's empirical histogram, Task B against the individual gold labels.
ScoreReport evaluate(const PredictionSet& preds, const AnnotationDataset& eval_ds,
                     const EvalConfig& cfg);

std::string score_report_to_json(const ScoreReport& r);
void save_score_report(const ScoreReport& r, const std::string& path);

// Gold Task B labels of a dataset view, keyed like PredictionSet.
PairLabels gold_pair_labels(const AnnotationDataset& ds);

// Predicts the globally most frequent train label everywhere (ties to the
// lower label).
PredictionSet baseline_most_frequent(const AnnotationDataset& train_ds,
                                     const AnnotationDataset& eval_ds);

// Uniform soft labels and seeded uniform-random per-pair labels.
PredictionSet baseline_random(const AnnotationDataset& eval_ds, std::uint64_t seed);

}  // namespace disco
