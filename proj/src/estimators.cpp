#include "prevcal/estimators.hpp"

#include "prevcal/errors.hpp"

namespace prevcal {

ClassProbs naive_estimate(const PredictionCounts& v) {
  if (v.total < 1) {
    throw EmptyDataError("naive_estimate: no predictions to count");
  }
  Vec p(v.v.size());
  for (std::size_t i = 0; i < v.v.size(); ++i) {
    p[i] = static_cast<double>(v.v[i]) / static_cast<double>(v.total);
  }
  return ClassProbs{std::move(p)};
}

ClassProbs predicted_marginal(const MisclassMatrix& m, const ClassProbs& p) {
  if (m.m.rows != p.values.size()) {
    throw ShapeError("predicted_marginal: dimension mismatch");
  }
  const std::size_t c = m.m.rows;
  Vec q(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      q[j] += m.m(i, j) * p.values[i];
    }
  }
  return ClassProbs{std::move(q)};
}

MisclassMatrix shrinkage_estimate(const TransferErrorMatrix& t,
                                  const Vec& gamma) {
  const std::size_t c = t.size();
  if (gamma.size() != c) {
    throw ShapeError("shrinkage_estimate: gamma length mismatch");
  }
  for (double g : gamma) {
    if (!(g > 0.0)) {
      throw ParameterError("shrinkage_estimate: gamma must be positive");
    }
  }
  Mat m(c, c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    const double n_i = static_cast<double>(t.row_sums[i]);
    if (n_i == 0.0) {
      m(i, i) = 1.0;
      continue;
    }
    const double lambda = gamma[i] / (n_i + gamma[i]);
    for (std::size_t j = 0; j < c; ++j) {
      m(i, j) = (1.0 - lambda) * static_cast<double>(t.t(i, j)) / n_i +
                (i == j ? lambda : 0.0);
    }
  }
  return MisclassMatrix{std::move(m)};
}

}  // namespace prevcal
