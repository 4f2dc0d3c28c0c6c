#ifndef PREVCAL_COVARIATE_HPP
#define PREVCAL_COVARIATE_HPP

#include <vector>

#include "prevcal/gibbs_single.hpp"
#include "prevcal/summary.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// Covariate-stratified class probabilities: a multi-logistic model on the
// unique covariate combinations, made conjugate with Polya-Gamma variables.
// The last class is the reference and its coefficients stay identically zero.

struct DesignMatrix {
  Mat x;  // G x D, one row per unique covariate combination, intercept included
  std::vector<std::string> term_names;  // length D

  std::size_t groups() const { return x.rows; }
  std::size_t terms() const { return x.cols; }
  void validate() const;
};

struct StratifiedCounts {
  IMat v;          // G x C predicted-class counts per group
  IVec group_sizes;  // n_g
  long long total = 0;

  static StratifiedCounts checked(IMat v);
  std::size_t groups() const { return v.rows; }
  std::size_t classes() const { return v.cols; }
};

struct RegressionPrior {
  Vec mean;        // m_0, length D (shared across classes by default)
  Mat covariance;  // W_0, D x D

  static RegressionPrior default_for(std::size_t d, double variance = 100.0);
};

struct CovariateState {
  Mat beta;                 // D x (C-1); reference class omitted
  Mat m;                    // misclassification rates
  Vec gamma;                // shrinkage weights
  std::vector<IMat> b;      // per-group allocation counts, each C x C
  Mat omega;                // G x (C-1) Polya-Gamma draws
};

// Softmax over x_g' beta with the implicit zero column for the reference
// class; guarded against overflow by max subtraction.
Vec softmax_probs(const Mat& beta, const Vec& x_row);

// Per-group latent allocations: b_gj ~ Multinomial(v_gj, m_*j p_g / norm).
std::vector<IMat> update_b_stratified(const CovariateState& state,
                                      const StratifiedCounts& counts,
                                      const DesignMatrix& design,
                                      RngStream& rng);

// Misclassification rows with group-summed allocation counts.
Mat update_m_stratified(const CovariateState& state,
                        const TransferErrorMatrix& t, const Hyperparams& hp,
                        RngStream& rng);

// Polya-Gamma refresh followed by one conjugate normal draw per non-reference
// class; throws InvalidStateError on a non-PD system.
void update_omega_beta(CovariateState& state, const StratifiedCounts& counts,
                       const DesignMatrix& design, const RegressionPrior& prior,
                       RngStream& rng);

PosteriorSummary run_covariate_chain(const StratifiedCounts& counts,
                                     const DesignMatrix& design,
                                     const TransferErrorMatrix& t,
                                     const Hyperparams& hp,
                                     const ChainConfig& cfg,
                                     const RegressionPrior& prior);

PosteriorSummary run_covariate_chain(const StratifiedCounts& counts,
                                     const DesignMatrix& design,
                                     const TransferErrorMatrix& t,
                                     const Hyperparams& hp,
                                     const ChainConfig& cfg);

}  // namespace prevcal

#endif
