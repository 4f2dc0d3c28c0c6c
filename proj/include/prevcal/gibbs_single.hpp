#ifndef PREVCAL_GIBBS_SINGLE_HPP
#define PREVCAL_GIBBS_SINGLE_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "prevcal/rng.hpp"
#include "prevcal/summary.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// Data-augmented Gibbs sampler for the single-classifier calibration model.
// A latent count matrix B allocates each predicted-class count v_j across
// true classes, which turns every conditional except the shrinkage weights
// gamma into a standard Dirichlet or multinomial draw; the gammas move by a
// Metropolis random walk on the log scale.

struct ChainConfig {
  long long n_burnin = 5000;
  long long n_samples = 5000;  // retained draws per chain
  long long thin = 1;
  unsigned n_chains = 3;
  std::uint64_t seed = 0;
  double mh_proposal_sd = 0.5;  // log-scale random-walk sd for gamma
  bool adapt_mh = false;        // diminishing adaptation toward 44% acceptance
                                // during burn-in, frozen afterwards
  bool keep_draws = false;
  // Testing/oracle variant: hold gamma fixed at these values and skip the
  // Metropolis step entirely. Ensemble samplers apply the same vector to
  // every classifier.
  std::optional<Vec> fixed_gamma;

  void validate() const;
};

struct ChainState {
  Vec p;       // class probabilities
  Mat m;       // misclassification rates
  Vec gamma;   // per-row shrinkage weights
  IMat b;      // latent allocation counts, b(i, j) of predicted class j
};

// b_j | . ~ Multinomial(v_j, (m_1j p_1, ..., m_Cj p_C) / sum_i m_ij p_i).
IMat update_b(const ChainState& state, const PredictionCounts& v,
              RngStream& rng);

// Row i | . ~ Dirichlet(b_i* + t_i* + gamma_i eps 1 + gamma_i e_i).
Mat update_m(const ChainState& state, const TransferErrorMatrix& t,
             const Hyperparams& hp, RngStream& rng);

// p | . ~ Dirichlet(rowsum(B) + delta 1).
Vec update_p(const ChainState& state, const Hyperparams& hp, RngStream& rng);

// Log full conditional of one gamma_i given its misclassification row.
double log_gamma_conditional(double gamma, const Mat& m, std::size_t i,
                             const Hyperparams& hp);

// One Metropolis sweep over the gammas; accepted[i] reports each move.
Vec update_gamma(const ChainState& state, const Hyperparams& hp,
                 const Vec& proposal_sd, RngStream& rng,
                 std::vector<int>* accepted = nullptr);

ChainState initial_state(const PredictionCounts& v,
                         const TransferErrorMatrix& t, const ChainConfig& cfg);

PosteriorSummary run_chain(const PredictionCounts& v,
                           const TransferErrorMatrix& t, const Hyperparams& hp,
                           const ChainConfig& cfg);

}  // namespace prevcal

#endif
