#pragma once

// Independent reference implementations used only by tests. Everything here
// deliberately avoids the library's code paths for the quantities it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "disco/corpus.hpp"
#include "disco/matrix.hpp"
#include "disco/model.hpp"
#include "disco/objective.hpp"
#include "disco/rng.hpp"

namespace oracle {

using disco::Vec;

inline Vec random_simplex(disco::Rng& rng, std::size_t c) {
  Vec v(c);
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(1.0 - rng.uniform01());  // Exp(1) draws normalize to a Dirichlet(1)
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

// Exact 1-D Wasserstein-1 via exhaustive Kantorovich duality: maximize
// sum f_i (p_i - q_i) over all extreme 1-Lipschitz potentials, i.e. every
// sign pattern of consecutive steps f_{i+1} - f_i = +/- (v_{i+1} - v_i).
// 2^(C-1) candidates; exact for any C, practical for C <= ~20.
inline double wasserstein_dual_bruteforce(const Vec& p, const Vec& q,
                                          const std::vector<double>& values) {
  const std::size_t c = p.size();
  if (c == 0 || q.size() != c || values.size() != c)
    throw std::invalid_argument("wasserstein_dual_bruteforce: bad input");
  double best = 0.0;
  const std::size_t patterns = std::size_t(1) << (c - 1);
  for (std::size_t bits = 0; bits < patterns; ++bits) {
    double fi = 0.0;  // f_0 = 0; translation does not change the objective
    double obj = 0.0;
    for (std::size_t i = 1; i < c; ++i) {
      const double step = values[i] - values[i - 1];
      fi += (bits >> (i - 1)) & 1 ? step : -step;
      obj += fi * (p[i] - q[i]);
    }
    best = std::max(best, std::fabs(obj));
  }
  return best;
}

// Feasible transport plan built greedily left to right; returns its cost.
// Optimal in 1-D, and an upper bound on the minimum by feasibility alone, so
// together with the dual maximum it sandwiches the exact optimum.
inline double wasserstein_greedy_plan_cost(const Vec& p, const Vec& q,
                                           const std::vector<double>& values) {
  const std::size_t c = p.size();
  Vec supply = p, demand = q;
  double cost = 0.0;
  std::size_t i = 0, j = 0;
  while (i < c && j < c) {
    const double moved = std::min(supply[i], demand[j]);
    if (moved > 0.0) {
      cost += moved * std::fabs(values[i] - values[j]);
      supply[i] -= moved;
      demand[j] -= moved;
    }
    // advance whichever side is (numerically) exhausted
    if (supply[i] <= 1e-15) ++i;
    else if (demand[j] <= 1e-15) ++j;
  }
  return cost;
}

inline double kl_bruteforce(const Vec& t, const Vec& p) {
  double kl = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] > 0.0) kl += t[k] * std::log(t[k] / p[k]);
  }
  return kl;
}

inline double manhattan_bruteforce(const Vec& p, const Vec& q) {
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    d += p[k] > q[k] ? p[k] - q[k] : q[k] - p[k];
  return d;
}

// Central finite differences of a scalar function of all parameters.
// Mutates a copy of the params entry-by-entry.
struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err_small = 0.0;  // entries with |analytic| < small_threshold
  std::size_t entries = 0;
};

inline GradCheckResult finite_difference_check(
    const disco::DiscoParams& params,
    const disco::GradientSet& analytic,
    const std::function<double(const disco::DiscoParams&)>& loss_of, double h,
    double small_threshold = 1e-8) {
  GradCheckResult res;
  disco::DiscoParams work = params;

  auto check_matrix = [&](disco::Matrix& wm, const disco::Matrix& gm) {
    for (std::size_t k = 0; k < wm.size(); ++k) {
      const double orig = wm.at_flat(k);
      wm.at_flat(k) = orig + h;
      const double up = loss_of(work);
      wm.at_flat(k) = orig - h;
      const double down = loss_of(work);
      wm.at_flat(k) = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = gm.at_flat(k);
      ++res.entries;
      if (std::fabs(an) < small_threshold) {
        res.max_abs_err_small = std::max(res.max_abs_err_small, std::fabs(an - fd));
      } else {
        const double rel = std::fabs(an - fd) / std::max(std::fabs(an), std::fabs(fd));
        res.max_rel_err = std::max(res.max_rel_err, rel);
      }
    }
  };

  check_matrix(work.W_I, analytic.W_I);
  check_matrix(work.W_A, analytic.W_A);
  check_matrix(work.W_P, analytic.W_P);
  check_matrix(work.W_E, analytic.W_E);
  check_matrix(work.W_y, analytic.W_y);
  check_matrix(work.W_yI, analytic.W_yI);
  check_matrix(work.W_yA, analytic.W_yA);
  return res;
}

}  // namespace oracle
