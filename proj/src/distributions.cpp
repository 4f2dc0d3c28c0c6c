#include "prevcal/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "prevcal/errors.hpp"

namespace prevcal {

namespace {

constexpr double kPi = 3.14159265358979323846;

// log Phi(x) for the standard normal, stable far into the left tail.
double log_norm_cdf(double x) {
  if (x > -10.0) {
    return std::log(0.5 * std::erfc(-x * 0.7071067811865475244));
  }
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

}  // namespace

double draw_normal(RngStream& rng) {
  // Marsaglia polar method; the pair's second variate is discarded so the
  // stream position depends only on the accepted draws.
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

double draw_exponential(RngStream& rng) { return -std::log(rng.uniform()); }

double draw_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw ParameterError("draw_gamma: shape and rate must be positive");
  }
  if (shape < 1.0) {
    const double g = draw_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = draw_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) {
      return d * v / rate;
    }
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v / rate;
    }
  }
}

double draw_log_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0)) {
    throw ParameterError("draw_log_gamma: shape must be positive");
  }
  if (shape < 1.0) {
    // log(Gamma(shape+1) * U^{1/shape}) stays finite where the direct draw
    // would underflow.
    return std::log(draw_gamma(shape + 1.0, 1.0, rng)) +
           std::log(rng.uniform()) / shape;
  }
  return std::log(draw_gamma(shape, 1.0, rng));
}

std::vector<double> draw_dirichlet(const std::vector<double>& alpha,
                                   RngStream& rng) {
  if (alpha.empty()) {
    throw ParameterError("draw_dirichlet: empty parameter vector");
  }
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw ParameterError("draw_dirichlet: all parameters must be positive");
    }
  }
  std::vector<double> lg(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lg[i] = draw_log_gamma(alpha[i], rng);
  }
  const double m = *std::max_element(lg.begin(), lg.end());
  std::vector<double> w(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    // Keep every component strictly positive; mass below the floor is far
    // beyond machine precision anyway and zeros would poison log-density
    // evaluations downstream.
    w[i] = std::max(std::exp(lg[i] - m), 1e-300);
    total += w[i];
  }
  for (double& x : w) {
    x /= total;
  }
  return w;
}

std::vector<long long> draw_multinomial(long long n,
                                        const std::vector<double>& probs,
                                        RngStream& rng) {
  if (n < 0) {
    throw ParameterError("draw_multinomial: n must be non-negative");
  }
  if (probs.empty()) {
    throw ParameterError("draw_multinomial: empty probability vector");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ParameterError("draw_multinomial: probabilities must be >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw ParameterError(
        "draw_multinomial: probabilities must sum to 1 within 1e-10, got " +
        std::to_string(total));
  }
  std::vector<long long> counts(probs.size(), 0);
  const std::size_t last = probs.size() - 1;
  for (long long t = 0; t < n; ++t) {
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t k = last;
    for (std::size_t i = 0; i < last; ++i) {
      acc += probs[i];
      if (u < acc) {
        k = i;
        break;
      }
    }
    ++counts[k];
  }
  return counts;
}

// --- Polya-Gamma -----------------------------------------------------------
//
// PG(1, c) = J*(1, c/2) / 4 where J* is sampled with the alternating-series
// method of Devroye (2009) as organized by Polson, Scott & Windle (2013).
// The proposal mixes a truncated inverse-Gaussian piece on (0, t] with a
// truncated exponential tail on (t, inf), t = 0.64.

namespace {

constexpr double kPgTrunc = 0.64;

// Piecewise coefficients a_n(x) of the alternating series for the J* density.
double pg_series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kPgTrunc) {
    return k * std::exp(-0.5 * k * k * x);
  }
  const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) +
                       std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
  return std::exp(expnt);
}

// Probability that the proposal comes from the exponential tail.
double pg_mass_texpon(double z) {
  const double t = kPgTrunc;
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) restricted to (0, t].
double pg_rtigauss(double z, RngStream& rng) {
  z = std::abs(z);
  const double t = kPgTrunc;
  double x = t + 1.0;
  if (1.0 / t > z) {
    // mu > t: rejection from the scaled chi-square tail representation,
    // valid down to z = 0.
    double alpha = 0.0;
    do {
      double e1, e2;
      do {
        e1 = draw_exponential(rng);
        e2 = draw_exponential(rng);
      } while (e1 * e1 > 2.0 * e2 / t);
      x = 1.0 + e1 * t;
      x = t / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    } while (rng.uniform() > alpha);
  } else {
    const double mu = 1.0 / z;
    while (x > t) {
      double y = draw_normal(rng);
      y *= y;
      const double mu_y = mu * y;
      x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) {
        x = mu * mu / x;
      }
    }
  }
  return x;
}

}  // namespace

double draw_polya_gamma_1(double c, RngStream& rng) {
  const double z = 0.5 * std::abs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double p_right = pg_mass_texpon(z);
  for (;;) {
    double x;
    if (rng.uniform() < p_right) {
      x = kPgTrunc + draw_exponential(rng) / fz;
    } else {
      x = pg_rtigauss(z, rng);
    }
    // Squeeze with the partial sums of the alternating series.
    double s = pg_series_coef(0, x);
    double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= pg_series_coef(n, x);
        if (y <= s) {
          return 0.25 * x;
        }
      } else {
        s += pg_series_coef(n, x);
        if (y > s) {
          break;
        }
      }
    }
  }
}

double draw_polya_gamma(const PolyaGammaParams& params, RngStream& rng) {
  if (!(params.b > 0.0)) {
    throw ParameterError("draw_polya_gamma: b must be positive");
  }
  const double rounded = std::nearbyint(params.b);
  if (std::abs(params.b - rounded) > 1e-9) {
    throw ParameterError("draw_polya_gamma: only integer b is supported");
  }
  const long long reps = static_cast<long long>(rounded);
  double total = 0.0;
  for (long long r = 0; r < reps; ++r) {
    total += draw_polya_gamma_1(params.c, rng);
  }
  return total;
}

MhResult mh_lognormal_step(double current,
                           const std::function<double(double)>& log_target,
                           double proposal_sd, RngStream& rng) {
  if (!(current > 0.0)) {
    throw ParameterError("mh_lognormal_step: current must be positive");
  }
  if (proposal_sd < 0.0) {
    throw ParameterError("mh_lognormal_step: proposal_sd must be >= 0");
  }
  if (proposal_sd == 0.0) {
    return {current, false};
  }
  const double lt_cur = log_target(current);
  if (std::isnan(lt_cur) || lt_cur == std::numeric_limits<double>::infinity()) {
    throw InvalidStateError("mh_lognormal_step: log target not finite at current value");
  }
  if (lt_cur == -std::numeric_limits<double>::infinity()) {
    throw InvalidStateError("mh_lognormal_step: log target is -inf at current value");
  }
  const double step = proposal_sd * draw_normal(rng);
  const double proposal = current * std::exp(step);
  const double lt_prop = log_target(proposal);
  if (std::isnan(lt_prop)) {
    return {current, false};
  }
  // log q(cur|prop) - log q(prop|cur) = log(prop) - log(cur) = step.
  const double log_ratio = lt_prop - lt_cur + step;
  if (std::log(rng.uniform()) < log_ratio) {
    return {proposal, true};
  }
  return {current, false};
}

}  // namespace prevcal
