#ifndef PREVCAL_INDIVIDUAL_HPP
#define PREVCAL_INDIVIDUAL_HPP

#include <vector>

#include "prevcal/summary.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// Individual-level class-membership posteriors by composition over retained
// draws: average of m_ij p_i / sum_i m_ij p_i across the draw set (with the
// product of per-classifier rates for ensembles). Deterministic given the
// draws; draws with a zero normalizer are skipped and counted.

struct IndividualPosterior {
  Vec probs;             // length C, on the simplex
  Vec mc_se;             // Monte Carlo standard error per class
  long long draws_used = 0;
  long long draws_skipped = 0;

  // More than 1% skipped draws warrants a warning at the reporting layer.
  bool skip_warning() const {
    return draws_skipped * 100 > draws_used + draws_skipped;
  }
};

// summary must carry retained draws with blocks "p" and "m" (or "m1" for a
// one-classifier ensemble run).
IndividualPosterior individual_posterior_single(int pred_class,
                                                const PosteriorSummary& summary);

// Pattern of predicted classes, one per classifier, against blocks
// "m1".."mK".
IndividualPosterior individual_posterior_ensemble(
    const std::vector<int>& pred_pattern, const PosteriorSummary& summary);

}  // namespace prevcal

#endif
