#include "prevcal/map_em.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"
#include "prevcal/gibbs_single.hpp"

namespace prevcal {

namespace {

constexpr double kFloor = 1e-10;

// Constrained argmax of sum_j a_j log x_j over the simplex with x_j >= floor.
// Coordinates whose KKT multiplier is active sit exactly at the floor; the
// rest are proportional to their coefficients over the remaining mass.
Vec floored_simplex_argmax(const Vec& a, bool* floored) {
  const std::size_t n = a.size();
  bool all_equal = true;
  for (std::size_t i = 1; i < n; ++i) {
    if (a[i] != a[0]) all_equal = false;
  }
  if (all_equal) {
    // Fully symmetric coefficients; the uniform vector is the canonical
    // resolution (and the argmax whenever the shared coefficient is >= 0).
    return Vec(n, 1.0 / static_cast<double>(n));
  }
  std::vector<bool> pinned(n, false);
  std::size_t n_pinned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0)) {
      pinned[i] = true;
      ++n_pinned;
    }
  }
  if (n_pinned == n) {
    // Everything wants the boundary; the simplex constraint forces the mass
    // onto the least-penalized coordinate.
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (a[i] > a[best]) best = i;
    }
    pinned[best] = false;
    --n_pinned;
  }
  for (;;) {
    double free_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!pinned[i]) free_sum += a[i];
    }
    const double free_mass = 1.0 - static_cast<double>(n_pinned) * kFloor;
    bool changed = false;
    Vec x(n, kFloor);
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) continue;
      if (free_sum > 0.0) {
        x[i] = a[i] / free_sum * free_mass;
      } else {
        x[i] = free_mass;  // single unpinned coordinate with a <= 0
      }
      if (x[i] < kFloor) {
        pinned[i] = true;
        ++n_pinned;
        changed = true;
      }
    }
    if (!changed) {
      if (floored && n_pinned > 0) *floored = true;
      return x;
    }
  }
}

// Project an initial point into the floored interior so every log term of
// the objective is finite from iteration zero.
Vec floor_and_renormalize(const Vec& x) {
  Vec out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::max(x[i], kFloor);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

void EmConfig::validate() const {
  if (max_iter < 0) {
    throw ParameterError("em config: max_iter must be >= 0");
  }
  if (!(tol > 0.0) || !(gamma_tol > 0.0)) {
    throw ParameterError("em config: tolerances must be positive");
  }
  if (!(gamma_lo > 0.0) || !(gamma_hi > gamma_lo)) {
    throw ParameterError("em config: need 0 < gamma_lo < gamma_hi");
  }
}

Mat e_step(const EmState& state, const PredictionCounts& v) {
  const std::size_t c = state.p.size();
  Mat bhat(c, c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    if (v.v[j] == 0) continue;
    double norm = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      norm += state.m(i, j) * state.p[i];
    }
    if (!(norm > 0.0)) {
      throw DegenerateStateError(
          "e_step: zero allocation mass for predicted class " +
          std::to_string(j + 1));
    }
    for (std::size_t i = 0; i < c; ++i) {
      bhat(i, j) = static_cast<double>(v.v[j]) * state.m(i, j) * state.p[i] /
                   norm;
    }
  }
  return bhat;
}

void m_step(EmState& state, const TransferErrorMatrix& t,
            const Hyperparams& hp, const EmConfig& cfg, bool* floored) {
  const std::size_t c = state.p.size();
  const double eps = hp.epsilon;

  // Misclassification rows.
  Vec coef(c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      coef[j] = state.bhat(i, j) + static_cast<double>(t.t(i, j)) +
                state.gamma[i] * eps + (i == j ? state.gamma[i] : 0.0) - 1.0;
    }
    const Vec row = floored_simplex_argmax(coef, floored);
    for (std::size_t j = 0; j < c; ++j) state.m(i, j) = row[j];
  }

  // Class probabilities.
  Vec pcoef(c);
  for (std::size_t i = 0; i < c; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) row_sum += state.bhat(i, j);
    pcoef[i] = row_sum + hp.delta - 1.0;
  }
  state.p = floored_simplex_argmax(pcoef, floored);

  // Shrinkage weights: one bracketed search each, never moving downhill.
  for (std::size_t i = 0; i < c; ++i) {
    const auto objective = [&](double log_g) {
      return log_gamma_conditional(std::exp(log_g), state.m, i, hp);
    };
    const double log_best = golden_section_max(
        objective, std::log(cfg.gamma_lo), std::log(cfg.gamma_hi),
        cfg.gamma_tol);
    const double cand = std::exp(log_best);
    if (log_gamma_conditional(cand, state.m, i, hp) >=
        log_gamma_conditional(state.gamma[i], state.m, i, hp)) {
      state.gamma[i] = cand;
    }
  }
}

double penalized_log_posterior(const Mat& m, const Vec& p, const Vec& gamma,
                               const PredictionCounts& v,
                               const TransferErrorMatrix& t,
                               const Hyperparams& hp) {
  const std::size_t c = p.size();
  const double eps = hp.epsilon;
  double ll = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (v.v[j] == 0) continue;
    double q = 0.0;
    for (std::size_t i = 0; i < c; ++i) q += m(i, j) * p[i];
    ll += static_cast<double>(v.v[j]) * std::log(q);
  }
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double expo = static_cast<double>(t.t(i, j)) + gamma[i] * eps +
                          (i == j ? gamma[i] : 0.0) - 1.0;
      ll += expo * std::log(m(i, j));
    }
    ll += std::lgamma(gamma[i] * (static_cast<double>(c) * eps + 1.0)) -
          (static_cast<double>(c) - 1.0) * std::lgamma(gamma[i] * eps) -
          std::lgamma(gamma[i] * (eps + 1.0));
    ll += (hp.delta - 1.0) * std::log(p[i]);
    ll += (hp.alpha_gamma - 1.0) * std::log(gamma[i]) -
          hp.beta_gamma * gamma[i];
  }
  return ll;
}

double golden_section_max(const std::function<double(double)>& fn, double lo,
                          double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = fn(x1), f2 = fn(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = fn(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = fn(x1);
    }
  }
  return 0.5 * (a + b);
}

EmResult run_em(const PredictionCounts& v, const TransferErrorMatrix& t,
                const Hyperparams& hp, const EmConfig& cfg) {
  cfg.validate();
  hp.validate();
  const std::size_t c = v.size();
  if (t.size() != c) {
    throw ShapeError("run_em: transfer matrix and counts disagree on C");
  }
  if (v.total < 1) {
    throw EmptyDataError("run_em: no unlabeled predictions");
  }

  EmResult out;
  EmState& state = out.state;
  state.gamma = Vec(c, 1.0);
  state.p = floor_and_renormalize(naive_estimate(v).values);
  state.m = shrinkage_estimate(t, state.gamma).m;
  for (std::size_t i = 0; i < c; ++i) {
    Vec row(c);
    for (std::size_t j = 0; j < c; ++j) row[j] = state.m(i, j);
    row = floor_and_renormalize(row);
    for (std::size_t j = 0; j < c; ++j) state.m(i, j) = row[j];
  }
  state.bhat = Mat(c, c, 0.0);

  out.objective = penalized_log_posterior(state.m, state.p, state.gamma, v, t, hp);
  for (long long it = 0; it < cfg.max_iter; ++it) {
    state.bhat = e_step(state, v);
    m_step(state, t, hp, cfg, &out.floored);
    const double next =
        penalized_log_posterior(state.m, state.p, state.gamma, v, t, hp);
    const double slack = 1e-10 * (1.0 + std::abs(out.objective));
    if (next < out.objective - slack) {
      throw InvalidStateError(
          "run_em: penalized log posterior decreased from " +
          std::to_string(out.objective) + " to " + std::to_string(next) +
          " at iteration " + std::to_string(it + 1));
    }
    const double change = std::abs(next - out.objective);
    out.objective = next;
    out.iterations = it + 1;
    if (change <= cfg.tol * (1.0 + std::abs(next))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace prevcal
