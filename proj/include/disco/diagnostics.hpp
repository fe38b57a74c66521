#pragma once

#include <map>
#include <string>
#include <vector>

#include "disco/corpus.hpp"
#include "disco/metrics.hpp"
#include "disco/predict.hpp"

namespace disco {

// Analysis tables emitted as CSV; plotting is external.

struct CalibrationRow {
  double bin_lo = 0.0, bin_hi = 0.0;
  double mean_modal_prob = 0.0;
  double mean_error = 0.0;
  std::size_t count = 0;
};

// Items bucketed by gold modal probability (max histogram entry) into
// equal-width bins over [1/C, 1]; per-bin mean of the per-item soft error.
std::vector<CalibrationRow> calibration_table(
    const std::map<std::string, double>& per_item_scores,
    const std::map<std::string, Histogram>& gold_hists, std::size_t bins);

struct LabelErrorRow {
  std::string label;
  double mean_abs_error = 0.0;
  std::size_t count = 0;
};

// Gold pairs grouped by gold label; mean |value(pred) - value(gold)| each.
std::vector<LabelErrorRow> per_label_error(const PairLabels& preds, const PairLabels& golds,
                                           const LabelSpace& ls);

struct NadBinRow {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
};

std::vector<NadBinRow> nad_distribution(const std::vector<double>& per_item_nad,
                                        std::size_t bins);

// Per-item normalized absolute distance (inputs for nad_distribution).
std::vector<double> per_item_nad_scores(const PairLabels& preds, const PairLabels& golds,
                                        const LabelSpace& ls);

struct AnnotatorErrorRow {
  std::string annotator_id;
  double error = 0.0;
  std::size_t count = 0;
};

// Per-annotator mean of the Task B metric; the count-weighted mean of the
// rows reproduces the global Task B score.
std::vector<AnnotatorErrorRow> annotator_error_table(const PairLabels& preds,
                                                     const PairLabels& golds,
                                                     const LabelSpace& ls,
                                                     PerspectivistMetric metric,
                                                     bool normalized);

struct CovariateRow {
  std::string item_id;
  std::size_t token_count = 0;
  double gold_entropy = 0.0;
  double error = 0.0;
};

// Whitespace token count over all text fields joined with the natural-log
// entropy of the gold histogram and the per-item error.
std::vector<CovariateRow> error_vs_covariates(
    const std::vector<Item>& items, const std::map<std::string, double>& per_item_errors,
    const std::map<std::string, Histogram>& gold_hists);

struct TokenCount {
  std::string token;
  std::size_t count = 0;
};

struct TokenTables {
  std::vector<TokenCount> hard;
  std::vector<TokenCount> easy;
  bool degenerate = false;  // all errors equal: both tables cover every item
};

// Token frequencies of the hardest and easiest items, split at the given
// error quantile (nearest rank). Sorted by count desc, ties lexicographic.
TokenTables hard_easy_tokens(const std::vector<Item>& items,
                             const std::map<std::string, double>& per_item_errors,
                             double quantile);

// Shannon entropy with natural log, 0*log0 = 0.
double histogram_entropy(const Histogram& h);

void write_calibration_csv(const std::vector<CalibrationRow>& rows, const std::string& path);
void write_label_error_csv(const std::vector<LabelErrorRow>& rows, const std::string& path);
void write_nad_csv(const std::vector<NadBinRow>& rows, const std::string& path);
void write_annotator_error_csv(const std::vector<AnnotatorErrorRow>& rows,
                               const std::string& path);
void write_covariates_csv(const std::vector<CovariateRow>& rows, const std::string& path);
void write_token_csv(const std::vector<TokenCount>& rows, const std::string& path);

}  // namespace disco
