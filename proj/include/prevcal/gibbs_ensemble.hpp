#ifndef PREVCAL_GIBBS_ENSEMBLE_HPP
#define PREVCAL_GIBBS_ENSEMBLE_HPP

#include <utility>
#include <vector>

#include "prevcal/gibbs_single.hpp"
#include "prevcal/summary.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// K-classifier ensemble samplers sharing one truth vector p. The joint model
// works on the sparse counts of observed prediction combinations; the
// independent model uses only the per-classifier marginals and pools their
// allocation counts into the p update.

struct EnsembleCounts {
  std::vector<IVec> v;  // per-classifier predicted-class counts, K of length C
  // Observed prediction combinations and their counts, sorted by pattern so
  // sweeps iterate in a fixed order. Never materializes the C^K table.
  std::vector<std::pair<std::vector<int>, long long>> combos;
  long long total = 0;  // N

  unsigned k() const { return static_cast<unsigned>(v.size()); }
  std::size_t c() const { return v.empty() ? 0 : v[0].size(); }
  bool has_joint() const { return !combos.empty(); }

  // From per-record prediction tuples; builds both marginals and combos.
  static EnsembleCounts from_records(std::size_t c,
                                     const std::vector<std::vector<int>>& records);
  // From explicit sparse joint counts; marginals are derived.
  static EnsembleCounts from_joint(
      std::size_t c, unsigned k,
      std::vector<std::pair<std::vector<int>, long long>> combos);
  // Marginals only; enough for the independent model.
  static EnsembleCounts from_marginals(std::vector<IVec> v);
};

struct EnsembleTransferErrors {
  std::vector<TransferErrorMatrix> t;

  unsigned k() const { return static_cast<unsigned>(t.size()); }
  std::size_t c() const { return t.empty() ? 0 : t[0].size(); }
  // Enforces identical row sums across classifiers (one labeled set scored
  // by all of them).
  static EnsembleTransferErrors checked(std::vector<TransferErrorMatrix> t);
};

struct EnsembleState {
  Vec p;
  std::vector<Mat> m;      // K misclassification matrices
  std::vector<Vec> gamma;  // K shrinkage-weight vectors
  std::vector<IVec> b_joint;  // joint model: one allocation per observed combo
  std::vector<IMat> b_indep;  // independent model: one matrix per classifier
};

// Joint model conditionals (Hadamard-product allocation over true classes).
std::vector<IVec> joint_update_b(const EnsembleState& state,
                                 const EnsembleCounts& counts, RngStream& rng);
std::vector<Mat> joint_update_m(const EnsembleState& state,
                                const EnsembleCounts& counts,
                                const EnsembleTransferErrors& errors,
                                const Hyperparams& hp, RngStream& rng);
Vec joint_update_p(const EnsembleState& state, const Hyperparams& hp,
                   RngStream& rng);
// Shared gamma sweep: the conditional of gamma_i^(k) only sees its own row.
std::vector<Vec> ensemble_update_gamma(const EnsembleState& state,
                                       const Hyperparams& hp,
                                       const std::vector<Vec>& proposal_sd,
                                       RngStream& rng,
                                       std::vector<int>* accepted = nullptr);

PosteriorSummary run_joint(const EnsembleCounts& counts,
                           const EnsembleTransferErrors& errors,
                           const Hyperparams& hp, const ChainConfig& cfg);

PosteriorSummary run_independent(const EnsembleCounts& counts,
                                 const EnsembleTransferErrors& errors,
                                 const Hyperparams& hp, const ChainConfig& cfg);

}  // namespace prevcal

#endif
