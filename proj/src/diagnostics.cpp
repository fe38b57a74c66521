#include "disco/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "disco/features.hpp"

namespace disco {

double histogram_entropy(const Histogram& h) {
  double e = 0.0;
  for (double p : h.probs) {
    if (p > 0.0) e -= p * std::log(p);
  }
  return e;
}

std::vector<CalibrationRow> calibration_table(
    const std::map<std::string, double>& per_item_scores,
    const std::map<std::string, Histogram>& gold_hists, std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("calibration_table: bins must be >= 2");
  if (per_item_scores.empty()) throw std::runtime_error("calibration_table: no items");

  std::size_t c = 0;
  for (const auto& [id, h] : gold_hists) {
    (void)id;
    c = h.probs.size();
    break;
  }
  if (c == 0) throw std::runtime_error("calibration_table: no gold histograms");

  const double lo = 1.0 / double(c);
  const double width = (1.0 - lo) / double(bins);

  std::vector<CalibrationRow> rows(bins);
  std::vector<double> prob_sum(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    rows[b].bin_lo = lo + double(b) * width;
    rows[b].bin_hi = b + 1 == bins ? 1.0 : lo + double(b + 1) * width;
  }

  for (const auto& [item_id, score] : per_item_scores) {
    auto it = gold_hists.find(item_id);
    if (it == gold_hists.end())
      throw std::runtime_error("calibration_table: no gold histogram for item '" + item_id +
                               "'");
    const double modal = *std::max_element(it->second.probs.begin(), it->second.probs.end());
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((modal - lo) / width) : 0;
    if (b >= bins) b = bins - 1;  // modal == 1 lands in the closed last bin
    rows[b].mean_error += score;
    prob_sum[b] += modal;
    ++rows[b].count;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    if (rows[b].count > 0) {
      rows[b].mean_error /= double(rows[b].count);
      rows[b].mean_modal_prob = prob_sum[b] / double(rows[b].count);
    }
  }
  return rows;
}

std::vector<LabelErrorRow> per_label_error(const PairLabels& preds, const PairLabels& golds,
                                           const LabelSpace& ls) {
  if (!ls.ordinal) throw std::runtime_error("per_label_error requires an ordinal label space");
  std::vector<LabelErrorRow> rows(ls.size());
  for (std::size_t k = 0; k < ls.size(); ++k) rows[k].label = ls.labels[k];
  for (const auto& [item_id, by_annot] : golds) {
    for (const auto& [annot_id, gold] : by_annot) {
      const auto pit = preds.find(item_id);
      if (pit == preds.end() || !pit->second.count(annot_id))
        throw std::runtime_error("per_label_error: missing prediction for item '" + item_id +
                                 "', annotator '" + annot_id + "'");
      const std::size_t pred = pit->second.at(annot_id);
      rows[gold].mean_abs_error += std::fabs(ls.values[pred] - ls.values[gold]);
      ++rows[gold].count;
    }
  }
  for (auto& r : rows) {
    if (r.count > 0) r.mean_abs_error /= double(r.count);
  }
  return rows;
}

std::vector<double> per_item_nad_scores(const PairLabels& preds, const PairLabels& golds,
                                        const LabelSpace& ls) {
  if (!ls.ordinal) throw std::runtime_error("NAD requires an ordinal label space");
  std::vector<double> out;
  const double range = ls.range();
  for (const auto& [item_id, by_annot] : golds) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [annot_id, gold] : by_annot) {
      const auto pit = preds.find(item_id);
      if (pit == preds.end() || !pit->second.count(annot_id))
        throw std::runtime_error("per_item_nad: missing prediction for item '" + item_id +
                                 "'");
      sum += std::fabs(ls.values[pit->second.at(annot_id)] - ls.values[gold]);
      ++n;
    }
    if (n > 0) out.push_back(sum / double(n) / range);
  }
  return out;
}

std::vector<NadBinRow> nad_distribution(const std::vector<double>& per_item_nad,
                                        std::size_t bins) {
  if (bins < 1) throw std::invalid_argument("nad_distribution: bins must be >= 1");
  std::vector<NadBinRow> rows(bins);
  const double width = 1.0 / double(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    rows[b].lo = double(b) * width;
    rows[b].hi = b + 1 == bins ? 1.0 : double(b + 1) * width;
  }
  for (double v : per_item_nad) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("NAD score outside [0,1]");
    std::size_t b = static_cast<std::size_t>(v / width);
    if (b >= bins) b = bins - 1;
    ++rows[b].count;
  }
  return rows;
}

std::vector<AnnotatorErrorRow> annotator_error_table(const PairLabels& preds,
                                                     const PairLabels& golds,
                                                     const LabelSpace& ls,
                                                     PerspectivistMetric metric,
                                                     bool normalized) {
  std::map<std::string, std::pair<double, std::size_t>> acc;  // id -> (sum, count)
  const double range = ls.range();
  for (const auto& [item_id, by_annot] : golds) {
    for (const auto& [annot_id, gold] : by_annot) {
      const auto pit = preds.find(item_id);
      if (pit == preds.end() || !pit->second.count(annot_id))
        throw std::runtime_error("annotator_error_table: missing prediction for item '" +
                                 item_id + "', annotator '" + annot_id + "'");
      const std::size_t pred = pit->second.at(annot_id);
      double err;
      if (metric == PerspectivistMetric::error_rate) {
        err = pred == gold ? 0.0 : 1.0;
      } else {
        err = std::fabs(ls.values[pred] - ls.values[gold]);
        if (normalized) err /= range;
      }
      auto& slot = acc[annot_id];
      slot.first += err;
      ++slot.second;
    }
  }
  std::vector<AnnotatorErrorRow> rows;
  rows.reserve(acc.size());
  for (const auto& [id, sc] : acc)
    rows.push_back({id, sc.first / double(sc.second), sc.second});
  return rows;
}

std::vector<CovariateRow> error_vs_covariates(
    const std::vector<Item>& items, const std::map<std::string, double>& per_item_errors,
    const std::map<std::string, Histogram>& gold_hists) {
  std::vector<CovariateRow> rows;
  for (const auto& item : items) {
    auto eit = per_item_errors.find(item.item_id);
    if (eit == per_item_errors.end()) continue;  // unscored item (no gold)
    CovariateRow r;
    r.item_id = item.item_id;
    for (const auto& [field, text] : item.text_fields) {
      (void)field;
      r.token_count += whitespace_tokens(text).size();
    }
    auto hit = gold_hists.find(item.item_id);
    if (hit == gold_hists.end())
      throw std::runtime_error("error_vs_covariates: no gold histogram for item '" +
                               item.item_id + "'");
    r.gold_entropy = histogram_entropy(hit->second);
    r.error = eit->second;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

void count_tokens(const Item& item, std::map<std::string, std::size_t>& counts) {
  for (const auto& [field, text] : item.text_fields) {
    (void)field;
    for (auto& tok : whitespace_tokens(text)) {
      std::transform(tok.begin(), tok.end(), tok.begin(),
                     [](unsigned char ch) { return std::tolower(ch); });
      ++counts[tok];
    }
  }
}

std::vector<TokenCount> sorted_counts(const std::map<std::string, std::size_t>& counts) {
  std::vector<TokenCount> rows;
  rows.reserve(counts.size());
  for (const auto& [tok, n] : counts) rows.push_back({tok, n});
  std::stable_sort(rows.begin(), rows.end(), [](const TokenCount& a, const TokenCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
  });
  return rows;
}

}  // namespace

TokenTables hard_easy_tokens(const std::vector<Item>& items,
                             const std::map<std::string, double>& per_item_errors,
                             double quantile) {
  if (quantile <= 0.0 || quantile >= 1.0)
    throw std::invalid_argument("hard_easy_tokens: quantile must be in (0,1)");
  std::vector<std::pair<const Item*, double>> scored;
  for (const auto& item : items) {
    auto it = per_item_errors.find(item.item_id);
    if (it != per_item_errors.end()) scored.push_back({&item, it->second});
  }
  if (scored.size() < 4) throw std::runtime_error("hard_easy_tokens: need at least 4 items");

  std::vector<double> errors;
  errors.reserve(scored.size());
  for (const auto& [item, e] : scored) errors.push_back(e);
  std::sort(errors.begin(), errors.end());

  // nearest-rank quantile thresholds; ties include all equal items
  const std::size_t n = errors.size();
  const std::size_t rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(quantile * double(n))));
  const double easy_cut = errors[rank - 1];
  const double hard_cut = errors[n - rank];

  TokenTables out;
  out.degenerate = errors.front() == errors.back();
  std::map<std::string, std::size_t> hard_counts, easy_counts;
  for (const auto& [item, e] : scored) {
    if (e >= hard_cut) count_tokens(*item, hard_counts);
    if (e <= easy_cut) count_tokens(*item, easy_counts);
  }
  out.hard = sorted_counts(hard_counts);
  out.easy = sorted_counts(easy_counts);
  return out;
}

// ---------------------------------------------------------------------------
// CSV writers

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  out.precision(12);
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += "\"\"";
    else q += ch;
  }
  q += "\"";
  return q;
}

}  // namespace

void write_calibration_csv(const std::vector<CalibrationRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "bin_lo,bin_hi,mean_modal_prob,mean_error,count\n";
  for (const auto& r : rows)
    out << r.bin_lo << ',' << r.bin_hi << ',' << r.mean_modal_prob << ',' << r.mean_error
        << ',' << r.count << '\n';
}

void write_label_error_csv(const std::vector<LabelErrorRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "label,mean_abs_error,count\n";
  for (const auto& r : rows)
    out << csv_escape(r.label) << ',' << r.mean_abs_error << ',' << r.count << '\n';
}

void write_nad_csv(const std::vector<NadBinRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "bin_lo,bin_hi,count\n";
  for (const auto& r : rows) out << r.lo << ',' << r.hi << ',' << r.count << '\n';
}

void write_annotator_error_csv(const std::vector<AnnotatorErrorRow>& rows,
                               const std::string& path) {
  auto out = open_csv(path);
  out << "annotator_id,error,count\n";
  for (const auto& r : rows)
    out << csv_escape(r.annotator_id) << ',' << r.error << ',' << r.count << '\n';
}

void write_covariates_csv(const std::vector<CovariateRow>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "item_id,token_count,gold_entropy,error\n";
  for (const auto& r : rows)
    out << csv_escape(r.item_id) << ',' << r.token_count << ',' << r.gold_entropy << ','
        << r.error << '\n';
}

void write_token_csv(const std::vector<TokenCount>& rows, const std::string& path) {
  auto out = open_csv(path);
  out << "token,count\n";
  for (const auto& r : rows) out << csv_escape(r.token) << ',' << r.count << '\n';
}

}  // namespace disco
