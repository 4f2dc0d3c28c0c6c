#include "prevcal/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "prevcal/errors.hpp"

namespace prevcal {

double csmf_accuracy(const Vec& estimate, const Vec& truth) {
  if (estimate.size() != truth.size() || truth.empty()) {
    throw ShapeError("csmf_accuracy: vectors must have equal nonzero length");
  }
  const double min_truth = *std::min_element(truth.begin(), truth.end());
  if (!(min_truth > 0.0)) {
    throw UndefinedMetricError(
        "csmf_accuracy: undefined when the reference has a zero component");
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    l1 += std::abs(estimate[i] - truth[i]);
  }
  return 1.0 - l1 / (2.0 * min_truth);
}

ConfusionCounts ConfusionCounts::from_pairs(
    std::size_t c, const std::vector<std::pair<int, int>>& pairs) {
  IMat counts(c, c, 0);
  for (const auto& [truth, pred] : pairs) {
    if (truth < 0 || truth >= static_cast<int>(c) || pred < 0 ||
        pred >= static_cast<int>(c)) {
      throw ParameterError("confusion counts: class index out of range");
    }
    ++counts(static_cast<std::size_t>(truth), static_cast<std::size_t>(pred));
  }
  return checked(std::move(counts));
}

ConfusionCounts ConfusionCounts::checked(IMat counts) {
  if (counts.rows == 0 || counts.rows != counts.cols) {
    throw ShapeError("confusion counts must be square and non-empty");
  }
  ConfusionCounts out;
  out.total = 0;
  for (long long x : counts.a) {
    if (x < 0) throw ParameterError("confusion counts must be >= 0");
    out.total += x;
  }
  out.counts = std::move(counts);
  return out;
}

double ccc(const ConfusionCounts& confusion, CccVariant variant) {
  const std::size_t c = confusion.counts.rows;
  const double n = static_cast<double>(confusion.total);
  if (confusion.total <= 1) {
    throw UndefinedMetricError("ccc: needs at least two classified records");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double tp = static_cast<double>(confusion.counts(i, i));
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row += static_cast<double>(confusion.counts(i, j));
      col += static_cast<double>(confusion.counts(j, i));
    }
    if (variant == CccVariant::AsWritten) {
      const double fn = row - tp;
      const double fp = col - tp;
      const double tn = n - tp - fn - fp;
      if (!(tp + tn > 0.0)) {
        throw UndefinedMetricError("ccc: TP + TN is zero for a class");
      }
      acc += (tp / (tp + tn) - 1.0 / n) / (1.0 - 1.0 / n);
    } else {
      if (!(row > 0.0)) {
        throw UndefinedMetricError(
            "ccc: a class has no true instances; sensitivity undefined");
      }
      const double sens = tp / row;
      const double chance = 1.0 / static_cast<double>(c);
      acc += (sens - chance) / (1.0 - chance);
    }
  }
  return acc / static_cast<double>(c);
}

Vec class_bias(const std::vector<Vec>& estimates, const Vec& truth) {
  if (estimates.empty()) {
    throw EmptyDataError("class_bias: no estimates");
  }
  Vec bias(truth.size(), 0.0);
  for (const Vec& e : estimates) {
    if (e.size() != truth.size()) {
      throw ShapeError("class_bias: estimate length mismatch");
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
      bias[i] += e[i];
    }
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    bias[i] = bias[i] / static_cast<double>(estimates.size()) - truth[i];
  }
  return bias;
}

}  // namespace prevcal
