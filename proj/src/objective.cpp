#include "disco/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "disco/metrics.hpp"

namespace disco {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "composite_kl") return LossKind::composite_kl;
  if (s == "wasserstein") return LossKind::wasserstein;
  if (s == "mae") return LossKind::mae;
  if (s == "combined") return LossKind::combined;
  if (s == "alternating") return LossKind::alternating;
  throw std::runtime_error("unknown loss kind: '" + s + "'");
}

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::composite_kl: return "composite_kl";
    case LossKind::wasserstein: return "wasserstein";
    case LossKind::mae: return "mae";
    case LossKind::combined: return "combined";
    case LossKind::alternating: return "alternating";
  }
  return "?";
}

void LossConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw std::runtime_error("loss config: alpha must be in [0,1]");
  if (lambda_item < 0.0 || lambda_annot < 0.0)
    throw std::runtime_error("loss config: lambda weights must be >= 0");
}

GradientSet GradientSet::shaped(const DiscoConfig& cfg) {
  const DiscoParams p = DiscoParams::shaped(cfg);
  GradientSet g;
  g.W_I = p.W_I; g.W_A = p.W_A; g.W_P = p.W_P; g.W_E = p.W_E;
  g.W_y = p.W_y; g.W_yI = p.W_yI; g.W_yA = p.W_yA;
  return g;
}

void GradientSet::zero() {
  for_each([](Matrix& m) { m.fill(0.0); });
}

AdamState AdamState::fresh(const DiscoConfig& cfg, double lr_) {
  AdamState st;
  st.m = GradientSet::shaped(cfg);
  st.v = GradientSet::shaped(cfg);
  st.lr = lr_;
  return st;
}

double loss_nll(const ForwardTrace& t, std::size_t y) {
  if (y >= t.logits_y.size()) throw std::out_of_range("loss_nll: label index out of range");
  return -log_softmax(t.logits_y)[y];
}

double loss_kl(const Histogram& target, const Vec& pred) {
  if (!target.valid()) throw std::runtime_error("loss_kl: target histogram has no support");
  if (target.probs.size() != pred.size())
    throw std::invalid_argument("loss_kl: length mismatch");
  double kl = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double t = target.probs[k];
    if (t <= 0.0) continue;
    if (!(pred[k] > 0.0)) throw std::runtime_error("loss_kl: prediction must be strictly positive");
    kl += t * (std::log(t) - std::log(pred[k]));
  }
  return kl;
}

double loss_wasserstein(const Histogram& target, const Vec& pred, const LabelSpace& ls) {
  if (!target.valid())
    throw std::runtime_error("loss_wasserstein: target histogram has no support");
  return wasserstein1(target.probs, pred, ls);
}

double loss_mae(const ForwardTrace& t, std::size_t y, const LabelSpace& ls) {
  if (!ls.ordinal) throw std::runtime_error("mae loss requires an ordinal label space");
  if (y >= ls.size()) throw std::out_of_range("loss_mae: label index out of range");
  double expected = 0.0;
  for (std::size_t k = 0; k < t.z_y.size(); ++k) expected += ls.values[k] * t.z_y[k];
  return std::fabs(expected - ls.values[y]);
}

double loss_combined(double wasserstein_part, double mae_part, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
  return alpha * wasserstein_part + (1.0 - alpha) * mae_part;
}

LossKind active_objective(const LossConfig& lc, std::size_t epoch) {
  if (lc.kind != LossKind::alternating) return lc.kind;
  return epoch % 2 == 0 ? LossKind::wasserstein : LossKind::mae;
}

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// d(loss)/d(logits) for KL(target || softmax(logits)), scaled by `weight`:
// weight * (probs - target).
void add_kl_logit_grad(const Vec& probs, const Vec& target, double weight, Vec& out) {
  for (std::size_t k = 0; k < probs.size(); ++k)
    out[k] += weight * (probs[k] - target[k]);
}

// Chain rule through softmax for a loss given as g = dL/dprobs:
// dL/dlogit_i = p_i * (g_i - sum_j p_j g_j).
void add_softmax_chain(const Vec& probs, const Vec& dprobs, double weight, Vec& out) {
  double dot = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) dot += probs[k] * dprobs[k];
  for (std::size_t k = 0; k < probs.size(); ++k)
    out[k] += weight * probs[k] * (dprobs[k] - dot);
}

// dW1/dpred for the CDF formula: pred[k] enters every CDF position >= k.
Vec wasserstein_dpred(const Vec& target, const Vec& pred, const LabelSpace& ls) {
  const std::size_t c = pred.size();
  Vec d(c, 0.0);
  double cdf_p = 0.0, cdf_t = 0.0;
  // suffix accumulation: walk CDF positions left to right, then fold back
  Vec step(c, 0.0);
  for (std::size_t k = 0; k + 1 < c; ++k) {
    cdf_t += target[k];
    cdf_p += pred[k];
    step[k] = sgn(cdf_p - cdf_t) * (ls.values[k + 1] - ls.values[k]);
  }
  double suffix = 0.0;
  for (std::size_t k = c; k-- > 0;) {
    if (k + 1 < c) suffix += step[k];
    d[k] = suffix;
  }
  return d;
}

// Per-example loss and the three head logit gradients.
double example_loss(const ForwardTrace& t, const BatchExample& ex, LossKind kind,
                    const LossConfig& lc, const LabelSpace& ls, Vec& gy, Vec& gI, Vec& gA) {
  const std::size_t c = t.z_y.size();
  switch (kind) {
    case LossKind::composite_kl: {
      if (!ex.item_hist || !ex.item_hist->valid() || !ex.annot_hist || !ex.annot_hist->valid())
        throw std::runtime_error("composite loss: histogram with zero support");
      double loss = loss_nll(t, ex.label);
      const Vec lsm = log_softmax(t.logits_yI);
      const Vec lsa = log_softmax(t.logits_yA);
      double kl_item = 0.0, kl_annot = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double ti = ex.item_hist->probs[k];
        if (ti > 0.0) kl_item += ti * (std::log(ti) - lsm[k]);
        const double ta = ex.annot_hist->probs[k];
        if (ta > 0.0) kl_annot += ta * (std::log(ta) - lsa[k]);
      }
      loss += lc.lambda_item * kl_item + lc.lambda_annot * kl_annot;
      for (std::size_t k = 0; k < c; ++k) gy[k] += t.z_y[k];
      gy[ex.label] -= 1.0;
      add_kl_logit_grad(t.z_yI, ex.item_hist->probs, lc.lambda_item, gI);
      add_kl_logit_grad(t.z_yA, ex.annot_hist->probs, lc.lambda_annot, gA);
      return loss;
    }
    case LossKind::wasserstein: {
      if (!ex.item_hist || !ex.item_hist->valid())
        throw std::runtime_error("wasserstein loss: item histogram with zero support");
      const double loss = loss_wasserstein(*ex.item_hist, t.z_yI, ls);
      const Vec dpred = wasserstein_dpred(ex.item_hist->probs, t.z_yI, ls);
      add_softmax_chain(t.z_yI, dpred, 1.0, gI);
      return loss;
    }
    case LossKind::mae: {
      const double loss = loss_mae(t, ex.label, ls);
      double expected = 0.0;
      for (std::size_t k = 0; k < c; ++k) expected += ls.values[k] * t.z_y[k];
      const double s = sgn(expected - ls.values[ex.label]);
      // dL/dlogit_i = s * p_i * (v_i - E)
      for (std::size_t k = 0; k < c; ++k)
        gy[k] += s * t.z_y[k] * (ls.values[k] - expected);
      return loss;
    }
    case LossKind::combined: {
      Vec gy2(c, 0.0), gI2(c, 0.0), gA2(c, 0.0);
      const double lw = example_loss(t, ex, LossKind::wasserstein, lc, ls, gy2, gI2, gA2);
      for (std::size_t k = 0; k < c; ++k) gI[k] += lc.alpha * gI2[k];
      gy2.assign(c, 0.0);
      const double lm = example_loss(t, ex, LossKind::mae, lc, ls, gy2, gI2, gA2);
      for (std::size_t k = 0; k < c; ++k) gy[k] += (1.0 - lc.alpha) * gy2[k];
      return loss_combined(lw, lm, lc.alpha);
    }
    case LossKind::alternating:
      throw std::logic_error("alternating must be resolved before example_loss");
  }
  throw std::logic_error("unreachable loss kind");
}

// Reverse pass from head logit gradients down to every weight matrix.
void backward(const DiscoParams& p, const DiscoConfig& cfg, const ForwardTrace& t,
              const Vec& gy, const Vec& gI, const Vec& gA, double scale, GradientSet& out) {
  const Activation act = cfg.activation;

  add_outer(out.W_y, gy, t.z_E, scale);
  add_outer(out.W_yI, gI, t.z_E, scale);
  add_outer(out.W_yA, gA, t.z_E, scale);

  Vec d_zE = matvec_t(p.W_y, gy);
  {
    const Vec d2 = matvec_t(p.W_yI, gI);
    const Vec d3 = matvec_t(p.W_yA, gA);
    for (std::size_t i = 0; i < d_zE.size(); ++i) d_zE[i] += d2[i] + d3[i];
  }

  Vec d_e(d_zE.size());
  for (std::size_t i = 0; i < d_e.size(); ++i)
    d_e[i] = d_zE[i] * activation_deriv(act, t.zE_pre[i]);
  add_outer(out.W_E, d_e, t.z_P, scale);

  Vec d_zP = matvec_t(p.W_E, d_e);
  for (std::size_t i = 0; i < d_zP.size(); ++i) d_zP[i] += d_e[i];  // residual path

  Vec d_p(d_zP.size());
  for (std::size_t i = 0; i < d_p.size(); ++i)
    d_p[i] = d_zP[i] * activation_deriv(act, t.zP_pre[i]);
  add_outer(out.W_P, d_p, t.concat_act, scale);

  const Vec d_u = matvec_t(p.W_P, d_p);
  Vec d_c(d_u.size());
  for (std::size_t i = 0; i < d_c.size(); ++i)
    d_c[i] = d_u[i] * activation_deriv(act, t.concat_pre[i]);

  const std::size_t ji = t.z_I.size();
  Vec d_zI(d_c.begin(), d_c.begin() + ji);
  Vec d_zA(d_c.begin() + ji, d_c.end());
  add_outer(out.W_I, d_zI, t.x, scale);
  add_outer(out.W_A, d_zA, t.a, scale);
}

}  // namespace

std::pair<double, GradientSet> batch_loss(const DiscoParams& p, const DiscoConfig& cfg,
                                          std::span<const BatchExample> batch,
                                          const LossConfig& lc, const LabelSpace& ls,
                                          std::size_t epoch, std::size_t threads) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  lc.validate();
  const LossKind kind = active_objective(lc, epoch);
  if ((kind == LossKind::wasserstein || kind == LossKind::mae ||
       kind == LossKind::combined) &&
      !ls.ordinal)
    throw std::runtime_error(std::string(to_string(kind)) +
                             " loss requires an ordinal label space");

  const double scale = 1.0 / double(batch.size());
  const std::size_t c = cfg.num_classes;

  const std::size_t workers =
      threads <= 1 ? 1 : std::min<std::size_t>(threads, batch.size());
  std::vector<GradientSet> grads(workers, GradientSet::shaped(cfg));
  std::vector<double> losses(workers, 0.0);
  std::vector<std::exception_ptr> errors(workers);

  auto run_chunk = [&](std::size_t lo, std::size_t hi, std::size_t w) {
    try {
      Vec gy(c), gI(c), gA(c);
      for (std::size_t i = lo; i < hi; ++i) {
        const BatchExample& ex = batch[i];
        const ForwardTrace t = forward(p, cfg, *ex.x, *ex.a);
        gy.assign(c, 0.0);
        gI.assign(c, 0.0);
        gA.assign(c, 0.0);
        losses[w] += scale * example_loss(t, ex, kind, lc, ls, gy, gI, gA);
        backward(p, cfg, t, gy, gI, gA, scale, grads[w]);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (workers == 1) {
    run_chunk(0, batch.size(), 0);
  } else {
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(batch.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_chunk, lo, hi, w);
    }
    for (auto& th : pool) th.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  // fixed-order reduction keeps results deterministic for a given thread count
  double loss = 0.0;
  for (std::size_t w = 0; w < workers; ++w) loss += losses[w];
  for (std::size_t w = 1; w < workers; ++w) {
    add_scaled(grads[0].W_I, grads[w].W_I, 1.0);
    add_scaled(grads[0].W_A, grads[w].W_A, 1.0);
    add_scaled(grads[0].W_P, grads[w].W_P, 1.0);
    add_scaled(grads[0].W_E, grads[w].W_E, 1.0);
    add_scaled(grads[0].W_y, grads[w].W_y, 1.0);
    add_scaled(grads[0].W_yI, grads[w].W_yI, 1.0);
    add_scaled(grads[0].W_yA, grads[w].W_yA, 1.0);
  }
  return {loss, std::move(grads[0])};
}

void adam_step(DiscoParams& params, const GradientSet& grads, AdamState& st) {
  ++st.t;
  const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));

  auto update = [&](Matrix& w, const Matrix& g, Matrix& m, Matrix& v) {
    if (!w.same_shape(g)) throw std::invalid_argument("adam_step: shape mismatch");
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g.at_flat(k);
      m.at_flat(k) = st.beta1 * m.at_flat(k) + (1.0 - st.beta1) * gk;
      v.at_flat(k) = st.beta2 * v.at_flat(k) + (1.0 - st.beta2) * gk * gk;
      const double m_hat = m.at_flat(k) / bc1;
      const double v_hat = v.at_flat(k) / bc2;
      w.at_flat(k) -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
    }
  };
  update(params.W_I, grads.W_I, st.m.W_I, st.v.W_I);
  update(params.W_A, grads.W_A, st.m.W_A, st.v.W_A);
  update(params.W_P, grads.W_P, st.m.W_P, st.v.W_P);
  update(params.W_E, grads.W_E, st.m.W_E, st.v.W_E);
  update(params.W_y, grads.W_y, st.m.W_y, st.v.W_y);
  update(params.W_yI, grads.W_yI, st.m.W_yI, st.v.W_yI);
  update(params.W_yA, grads.W_yA, st.m.W_yA, st.v.W_yA);
}

}  // namespace disco
