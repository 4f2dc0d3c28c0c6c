#ifndef PREVCAL_ESTIMATORS_HPP
#define PREVCAL_ESTIMATORS_HPP

#include "prevcal/types.hpp"

namespace prevcal {

// Method-of-moments estimate of the predicted-class marginal: v / N.
ClassProbs naive_estimate(const PredictionCounts& v);

// q = M' p, the class marginal the classifier induces under truth p.
ClassProbs predicted_marginal(const MisclassMatrix& m, const ClassProbs& p);

// Row-wise shrinkage of the empirical misclassification rates toward the
// identity: row i is (1 - lambda_i) T_i/n_i + lambda_i e_i with
// lambda_i = gamma_i / (n_i + gamma_i). Rows with no labeled data collapse
// to the identity row, so the no-data case reproduces the naive classifier.
MisclassMatrix shrinkage_estimate(const TransferErrorMatrix& t,
                                  const Vec& gamma);

}  // namespace prevcal

#endif
