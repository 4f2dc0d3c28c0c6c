#include "prevcal/types.hpp"

#include <cmath>
#include <set>

#include "prevcal/errors.hpp"

namespace prevcal {

ClassLabelMap::ClassLabelMap(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw ParameterError("class label map needs at least 2 classes");
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) {
      throw ParameterError("class labels must be non-empty");
    }
    if (!seen.insert(l).second) {
      throw ParameterError("duplicate class label: " + l);
    }
  }
}

std::size_t ClassLabelMap::index(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  throw InputError("unknown class label: " + label);
}

bool ClassLabelMap::contains(const std::string& label) const {
  for (const auto& l : labels_) {
    if (l == label) return true;
  }
  return false;
}

ClassProbs ClassProbs::checked(Vec values) {
  if (values.empty()) {
    throw ShapeError("class probabilities must be non-empty");
  }
  double total = 0.0;
  for (double x : values) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ParameterError("class probabilities must be finite and >= 0");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw ParameterError("class probabilities must sum to 1 within 1e-10");
  }
  return ClassProbs{std::move(values)};
}

MisclassMatrix MisclassMatrix::checked(Mat m) {
  if (m.rows == 0 || m.rows != m.cols) {
    throw ShapeError("misclassification matrix must be square and non-empty");
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double x = m(i, j);
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw ParameterError("misclassification entries must be >= 0");
      }
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-10) {
      throw ParameterError("misclassification rows must sum to 1 within 1e-10");
    }
  }
  return MisclassMatrix{std::move(m)};
}

TransferErrorMatrix TransferErrorMatrix::checked(IMat t) {
  if (t.rows == 0 || t.rows != t.cols) {
    throw ShapeError("transfer error matrix must be square and non-empty");
  }
  TransferErrorMatrix out;
  out.row_sums.assign(t.rows, 0);
  out.total = 0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t j = 0; j < t.cols; ++j) {
      if (t(i, j) < 0) {
        throw ParameterError("transfer error counts must be >= 0");
      }
      out.row_sums[i] += t(i, j);
    }
    out.total += out.row_sums[i];
  }
  out.t = std::move(t);
  return out;
}

TransferErrorMatrix TransferErrorMatrix::zeros(std::size_t c) {
  return checked(IMat(c, c, 0));
}

PredictionCounts PredictionCounts::checked(IVec v) {
  if (v.empty()) {
    throw ShapeError("prediction counts must be non-empty");
  }
  long long total = 0;
  for (long long x : v) {
    if (x < 0) {
      throw ParameterError("prediction counts must be >= 0");
    }
    total += x;
  }
  return PredictionCounts{std::move(v), total};
}

void Hyperparams::validate() const {
  if (!(epsilon > 0.0)) {
    throw ParameterError("epsilon must be positive");
  }
  if (!(delta >= 0.0)) {
    throw ParameterError("delta must be non-negative");
  }
  if (!(alpha_gamma > 0.0) || !(beta_gamma > 0.0)) {
    throw ParameterError("gamma prior parameters must be positive");
  }
}

}  // namespace prevcal
