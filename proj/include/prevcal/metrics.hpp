#ifndef PREVCAL_METRICS_HPP
#define PREVCAL_METRICS_HPP

#include <utility>
#include <vector>

#include "prevcal/types.hpp"

namespace prevcal {

// CSMF accuracy: 1 - ||estimate - truth||_1 / (2 min_i truth_i). Equals 1
// exactly at estimate == truth and can go negative.
double csmf_accuracy(const Vec& estimate, const Vec& truth);

struct ConfusionCounts {
  IMat counts;  // counts(i, j) = #(true class i, predicted class j)
  long long total = 0;

  static ConfusionCounts from_pairs(std::size_t c,
                                    const std::vector<std::pair<int, int>>& pairs);
  static ConfusionCounts checked(IMat counts);
};

enum class CccVariant {
  // The formula as printed in the source material: per-class
  // TP_i / (TP_i + TN_i) with chance term 1/N.
  AsWritten,
  // The standard definition: per-class sensitivity TP_i / (TP_i + FN_i)
  // with chance term 1/C.
  Literature,
};

double ccc(const ConfusionCounts& confusion, CccVariant variant);

// Per-class mean(estimate) - truth over a collection of estimates.
Vec class_bias(const std::vector<Vec>& estimates, const Vec& truth);

}  // namespace prevcal

#endif
