#include "prevcal/individual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prevcal/errors.hpp"

namespace prevcal {

namespace {

// Accumulates the composition average over every retained draw; m_blocks
// lists the schema offsets of the per-classifier rate matrices.
IndividualPosterior compose(const std::vector<int>& pattern,
                            const PosteriorSummary& summary,
                            const std::vector<std::size_t>& m_offsets) {
  if (summary.chains.empty()) {
    throw EmptyDataError(
        "individual posterior needs retained draws (run with keep_draws)");
  }
  const std::size_t c = summary.schema.block_size("p");
  const std::size_t p_off = summary.schema.offset("p");
  for (int j : pattern) {
    if (j < 0 || j >= static_cast<int>(c)) {
      throw ParameterError("predicted class index out of range");
    }
  }

  Vec sum(c, 0.0), sumsq(c, 0.0), member(c);
  long long used = 0, skipped = 0;
  for (const ChainDraws& chain : summary.chains) {
    for (const Vec& d : chain.draws) {
      double norm = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        double u = d[p_off + i];
        for (std::size_t a = 0; a < m_offsets.size(); ++a) {
          const auto j = static_cast<std::size_t>(pattern[a]);
          u *= d[m_offsets[a] + i * c + j];
        }
        member[i] = u;
        norm += u;
      }
      if (!(norm > 0.0)) {
        ++skipped;
        continue;
      }
      ++used;
      for (std::size_t i = 0; i < c; ++i) {
        const double w = member[i] / norm;
        sum[i] += w;
        sumsq[i] += w * w;
      }
    }
  }
  if (used == 0) {
    throw DegenerateStateError(
        "individual posterior: every draw gave this prediction pattern zero "
        "probability; the pattern is inconsistent under the fitted rates "
        "(e.g. two near-perfect classifiers that disagree)");
  }
  IndividualPosterior out;
  out.draws_used = used;
  out.draws_skipped = skipped;
  out.probs.resize(c);
  out.mc_se.resize(c);
  const double n = static_cast<double>(used);
  for (std::size_t i = 0; i < c; ++i) {
    out.probs[i] = sum[i] / n;
    const double var =
        used > 1 ? (sumsq[i] - n * out.probs[i] * out.probs[i]) / (n - 1.0)
                 : 0.0;
    out.mc_se[i] = std::sqrt(std::max(var, 0.0) / n);
  }
  return out;
}

}  // namespace

IndividualPosterior individual_posterior_single(int pred_class,
                                                const PosteriorSummary& summary) {
  const std::string m_block = summary.schema.has_block("m") ? "m" : "m1";
  return compose({pred_class}, summary, {summary.schema.offset(m_block)});
}

IndividualPosterior individual_posterior_ensemble(
    const std::vector<int>& pred_pattern, const PosteriorSummary& summary) {
  if (pred_pattern.empty()) {
    throw ShapeError("prediction pattern must name at least one classifier");
  }
  if (pred_pattern.size() == 1 && summary.schema.has_block("m")) {
    return individual_posterior_single(pred_pattern[0], summary);
  }
  std::vector<std::size_t> offsets;
  for (std::size_t a = 0; a < pred_pattern.size(); ++a) {
    const std::string block = "m" + std::to_string(a + 1);
    if (!summary.schema.has_block(block)) {
      throw ShapeError("draws carry " + std::to_string(a) +
                       " classifiers but the pattern names " +
                       std::to_string(pred_pattern.size()));
    }
    offsets.push_back(summary.schema.offset(block));
  }
  if (summary.schema.has_block("m" + std::to_string(pred_pattern.size() + 1))) {
    throw ShapeError("pattern names fewer classifiers than the draws carry");
  }
  return compose(pred_pattern, summary, offsets);
}

}  // namespace prevcal
