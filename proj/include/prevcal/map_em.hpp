#ifndef PREVCAL_MAP_EM_HPP
#define PREVCAL_MAP_EM_HPP

#include <functional>

#include "prevcal/types.hpp"

namespace prevcal {

// EM algorithm for posterior modes of (p, M, gamma) in the single-classifier
// model. The same latent allocation counts used by the Gibbs sampler give a
// closed-form M-step for p and the misclassification rows; each gamma is a
// one-dimensional conditional maximization.

struct EmConfig {
  long long max_iter = 10000;
  double tol = 1e-8;  // relative change of the penalized log posterior
  double gamma_lo = 1e-4;
  double gamma_hi = 1e4;
  double gamma_tol = 1e-8;  // bracket width on the log scale

  void validate() const;
};

struct EmState {
  Mat m;
  Vec p;
  Vec gamma;
  Mat bhat;  // expected allocation counts, fractional
};

struct EmResult {
  EmState state;
  long long iterations = 0;
  double objective = 0.0;
  bool converged = false;
  bool floored = false;  // some closed-form numerator was pinned at the floor
};

// bhat(i, j) = v_j m_ij p_i / sum_i m_ij p_i.
Mat e_step(const EmState& state, const PredictionCounts& v);

// Closed-form row/p updates plus the bracketed gamma searches. Numerators
// that would go non-positive are pinned exactly at 1e-10 (the constrained
// argmax over the floored simplex), which keeps iterates interior and the
// ascent property exact.
void m_step(EmState& state, const TransferErrorMatrix& t,
            const Hyperparams& hp, const EmConfig& cfg, bool* floored);

// Penalized (posterior) log density of (m, p, gamma) given v and t, up to a
// constant; the quantity EM must never decrease.
double penalized_log_posterior(const Mat& m, const Vec& p, const Vec& gamma,
                               const PredictionCounts& v,
                               const TransferErrorMatrix& t,
                               const Hyperparams& hp);

// Golden-section maximizer of fn over [lo, hi].
double golden_section_max(const std::function<double(double)>& fn, double lo,
                          double hi, double tol);

EmResult run_em(const PredictionCounts& v, const TransferErrorMatrix& t,
                const Hyperparams& hp, const EmConfig& cfg);

}  // namespace prevcal

#endif
