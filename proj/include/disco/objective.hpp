#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "disco/corpus.hpp"
#include "disco/model.hpp"

namespace disco {

enum class LossKind { composite_kl, wasserstein, mae, combined, alternating };

LossKind loss_kind_from_string(const std::string& s);
const char* to_string(LossKind k);

struct LossConfig {
  LossKind kind = LossKind::composite_kl;
  double alpha = 0.6;        // combined: weight of the Wasserstein part
  double lambda_item = 1.0;  // composite: weight of the item-level KL term
  double lambda_annot = 1.0; // composite: weight of the annotator-level KL term

  void validate() const;
};

struct GradientSet {
  Matrix W_I, W_A, W_P, W_E, W_y, W_yI, W_yA;

  static GradientSet shaped(const DiscoConfig& cfg);
  void zero();

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(W_I); fn(W_A); fn(W_P); fn(W_E); fn(W_y); fn(W_yI); fn(W_yA);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(W_I); fn(W_A); fn(W_P); fn(W_E); fn(W_y); fn(W_yI); fn(W_yA);
  }
};

struct AdamState {
  GradientSet m, v;  // first/second moment accumulators
  std::size_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const DiscoConfig& cfg, double lr);
};

// -log z_y[y], evaluated in log-space from the logits.
double loss_nll(const ForwardTrace& t, std::size_t y);

// KL(target || pred) with 0*log0 = 0. pred must be strictly positive.
double loss_kl(const Histogram& target, const Vec& pred);

// 1-D Wasserstein-1 between target histogram and prediction on the label
// value scale (same formula as the evaluation metric).
double loss_wasserstein(const Histogram& target, const Vec& pred, const LabelSpace& ls);

// |E[label value under z_y] - value(y)|: differentiable stand-in for the
// absolute-distance metric.
double loss_mae(const ForwardTrace& t, std::size_t y, const LabelSpace& ls);

double loss_combined(double wasserstein_part, double mae_part, double alpha);

// Loss of one (item, annotator, label) observation with its frozen
// empirical histograms. Vectors are borrowed, not owned.
struct BatchExample {
  const Vec* x = nullptr;
  const Vec* a = nullptr;
  std::size_t label = 0;
  const Histogram* item_hist = nullptr;
  const Histogram* annot_hist = nullptr;
};

// The objective actually applied at a given epoch (alternating resolves by
// epoch parity: Wasserstein on even epochs, MAE on odd ones).
LossKind active_objective(const LossConfig& lc, std::size_t epoch);

// Mean per-example loss over the batch and its analytic gradient for every
// parameter, via one reverse pass per example.
std::pair<double, GradientSet> batch_loss(const DiscoParams& p, const DiscoConfig& cfg,
                                          std::span<const BatchExample> batch,
                                          const LossConfig& lc, const LabelSpace& ls,
                                          std::size_t epoch, std::size_t threads = 1);

// Standard Adam with bias correction; increments st.t.
void adam_step(DiscoParams& params, const GradientSet& grads, AdamState& st);

}  // namespace disco
