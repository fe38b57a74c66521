#include "disco/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "disco/rng.hpp"

namespace disco {

Activation activation_from_string(const std::string& s) {
  if (s == "softsign") return Activation::softsign;
  if (s == "relu") return Activation::relu;
  if (s == "elu") return Activation::elu;
  throw std::runtime_error("unknown activation: '" + s + "'");
}

WeightInit init_from_string(const std::string& s) {
  if (s == "gaussian") return WeightInit::gaussian;
  if (s == "uniform") return WeightInit::uniform;
  throw std::runtime_error("unknown weight init: '" + s + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::softsign: return "softsign";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
  }
  return "?";
}

const char* to_string(WeightInit w) {
  return w == WeightInit::gaussian ? "gaussian" : "uniform";
}

void DiscoConfig::validate() const {
  if (item_input_dim < 1 || annot_input_dim < 1 || item_latent_dim < 1 ||
      annot_latent_dim < 1 || hidden() < 1)
    throw std::runtime_error("model config: all dimensions must be >= 1");
  if (num_classes < 2) throw std::runtime_error("model config: num_classes must be >= 2");
  if (init_scale && (*init_scale < 0.0 || !std::isfinite(*init_scale)))
    throw std::runtime_error("model config: init_scale must be finite and >= 0");
}

DiscoParams DiscoParams::shaped(const DiscoConfig& cfg) {
  const std::size_t h = cfg.hidden();
  DiscoParams p;
  p.W_I = Matrix(cfg.item_latent_dim, cfg.item_input_dim);
  p.W_A = Matrix(cfg.annot_latent_dim, cfg.annot_input_dim);
  p.W_P = Matrix(h, cfg.item_latent_dim + cfg.annot_latent_dim);
  p.W_E = Matrix(h, h);
  p.W_y = Matrix(cfg.num_classes, h);
  p.W_yI = Matrix(cfg.num_classes, h);
  p.W_yA = Matrix(cfg.num_classes, h);
  return p;
}

void DiscoParams::validate_shapes(const DiscoConfig& cfg) const {
  const DiscoParams ref = shaped(cfg);
  if (!W_I.same_shape(ref.W_I) || !W_A.same_shape(ref.W_A) || !W_P.same_shape(ref.W_P) ||
      !W_E.same_shape(ref.W_E) || !W_y.same_shape(ref.W_y) || !W_yI.same_shape(ref.W_yI) ||
      !W_yA.same_shape(ref.W_yA))
    throw std::runtime_error("parameter shapes do not match the model config");
}

double activation_value(Activation kind, double t) {
  switch (kind) {
    case Activation::softsign: return t / (1.0 + std::fabs(t));
    case Activation::relu: return t > 0.0 ? t : 0.0;
    case Activation::elu: return t > 0.0 ? t : std::expm1(t);
  }
  return 0.0;
}

double activation_deriv(Activation kind, double t) {
  switch (kind) {
    case Activation::softsign: {
      const double d = 1.0 + std::fabs(t);
      return 1.0 / (d * d);
    }
    case Activation::relu: return t > 0.0 ? 1.0 : 0.0;
    case Activation::elu: return t > 0.0 ? 1.0 : std::exp(t);
  }
  return 0.0;
}

Vec softmax(const Vec& logits) {
  Vec out(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

Vec log_softmax(const Vec& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  Vec out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
  return out;
}

DiscoParams init_params(const DiscoConfig& cfg) {
  cfg.validate();
  DiscoParams p = DiscoParams::shaped(cfg);
  const double scale = cfg.resolved_init_scale();
  if (scale == 0.0) return p;
  Rng rng(cfg.seed);
  p.for_each([&](const char*, Matrix& m) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      m.at_flat(k) = cfg.init == WeightInit::gaussian ? scale * rng.normal()
                                                      : rng.uniform(-scale, scale);
    }
  });
  return p;
}

ForwardTrace forward(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                     const Vec& a) {
  if (x.size() != cfg.item_input_dim)
    throw std::invalid_argument("forward: item vector has dim " + std::to_string(x.size()) +
                                ", expected " + std::to_string(cfg.item_input_dim));
  if (a.size() != cfg.annot_input_dim)
    throw std::invalid_argument("forward: annotator vector has dim " +
                                std::to_string(a.size()) + ", expected " +
                                std::to_string(cfg.annot_input_dim));

  const Activation act = cfg.activation;
  ForwardTrace t;
  t.x = x;
  t.a = a;
  t.z_I = matvec(p.W_I, x);
  t.z_A = matvec(p.W_A, a);

  t.concat_pre.reserve(t.z_I.size() + t.z_A.size());
  t.concat_pre.insert(t.concat_pre.end(), t.z_I.begin(), t.z_I.end());
  t.concat_pre.insert(t.concat_pre.end(), t.z_A.begin(), t.z_A.end());
  t.concat_act.resize(t.concat_pre.size());
  for (std::size_t i = 0; i < t.concat_pre.size(); ++i)
    t.concat_act[i] = activation_value(act, t.concat_pre[i]);

  t.zP_pre = matvec(p.W_P, t.concat_act);
  t.z_P.resize(t.zP_pre.size());
  for (std::size_t i = 0; i < t.zP_pre.size(); ++i)
    t.z_P[i] = activation_value(act, t.zP_pre[i]);

  t.zE_pre = matvec(p.W_E, t.z_P);
  for (std::size_t i = 0; i < t.zE_pre.size(); ++i) t.zE_pre[i] += t.z_P[i];  // residual
  t.z_E.resize(t.zE_pre.size());
  for (std::size_t i = 0; i < t.zE_pre.size(); ++i)
    t.z_E[i] = activation_value(act, t.zE_pre[i]);

  t.logits_y = matvec(p.W_y, t.z_E);
  t.logits_yI = matvec(p.W_yI, t.z_E);
  t.logits_yA = matvec(p.W_yA, t.z_E);
  t.z_y = softmax(t.logits_y);
  t.z_yI = softmax(t.logits_yI);
  t.z_yA = softmax(t.logits_yA);
  return t;
}

}  // namespace disco
