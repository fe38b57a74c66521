#pragma once

#include <cstdint>
#include <optional>

#include "disco/matrix.hpp"

namespace disco {

enum class Activation { softsign, relu, elu };
enum class Fusion { concat };
enum class WeightInit { gaussian, uniform };

Activation activation_from_string(const std::string& s);
WeightInit init_from_string(const std::string& s);
const char* to_string(Activation a);
const char* to_string(WeightInit w);

struct DiscoConfig {
  std::size_t item_input_dim = 0;    // J
  std::size_t annot_input_dim = 0;   // D_A (N for one-hot annotators)
  std::size_t item_latent_dim = 0;   // J_I
  std::size_t annot_latent_dim = 0;  // J_A
  std::size_t hidden_dim = 0;        // H; 0 means "use item_latent_dim"
  std::size_t num_classes = 0;       // C
  Activation activation = Activation::softsign;
  Fusion fusion = Fusion::concat;
  WeightInit init = WeightInit::gaussian;
  std::optional<double> init_scale;  // unset: 0.05 gaussian, 0.1 uniform
  std::uint64_t seed = 0;

  std::size_t hidden() const { return hidden_dim ? hidden_dim : item_latent_dim; }
  double resolved_init_scale() const {
    if (init_scale) return *init_scale;
    return init == WeightInit::gaussian ? 0.05 : 0.1;
  }
  void validate() const;
};

// The seven weight matrices. No bias terms anywhere.
struct DiscoParams {
  Matrix W_I;   // J_I x J
  Matrix W_A;   // J_A x D_A
  Matrix W_P;   // H x (J_I + J_A)
  Matrix W_E;   // H x H
  Matrix W_y;   // C x H, per-annotator label head
  Matrix W_yI;  // C x H, item-level head
  Matrix W_yA;  // C x H, annotator-level head

  static DiscoParams shaped(const DiscoConfig& cfg);
  void validate_shapes(const DiscoConfig& cfg) const;

  bool operator==(const DiscoParams&) const = default;

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("W_I", W_I); fn("W_A", W_A); fn("W_P", W_P); fn("W_E", W_E);
    fn("W_y", W_y); fn("W_yI", W_yI); fn("W_yA", W_yA);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn("W_I", W_I); fn("W_A", W_A); fn("W_P", W_P); fn("W_E", W_E);
    fn("W_y", W_y); fn("W_yI", W_yI); fn("W_yA", W_yA);
  }
};

// Every intermediate of one item/annotator forward pass, kept for the
// reverse pass.
struct ForwardTrace {
  Vec x, a;
  Vec z_I, z_A;
  Vec concat_pre, concat_act;  // fused input before/after activation
  Vec zP_pre, z_P;
  Vec zE_pre, z_E;             // residual pre-activation: W_E z_P + z_P
  Vec logits_y, logits_yI, logits_yA;
  Vec z_y, z_yI, z_yA;
};

double activation_value(Activation kind, double t);
double activation_deriv(Activation kind, double t);

Vec softmax(const Vec& logits);
Vec log_softmax(const Vec& logits);

DiscoParams init_params(const DiscoConfig& cfg);

ForwardTrace forward(const DiscoParams& p, const DiscoConfig& cfg, const Vec& x,
                     const Vec& a);

}  // namespace disco
