#include "prevcal/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include "prevcal/errors.hpp"

namespace prevcal {

std::string ParamName::dotted() const {
  std::string s = block;
  if (row >= 0) s += "." + std::to_string(row + 1);
  if (col >= 0) s += "." + std::to_string(col + 1);
  return s;
}

void DrawSchema::add_vector(const std::string& block, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back({block, static_cast<int>(i), -1});
  }
}

void DrawSchema::add_matrix(const std::string& block, std::size_t r,
                            std::size_t c) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      names.push_back({block, static_cast<int>(i), static_cast<int>(j)});
    }
  }
}

std::size_t DrawSchema::offset(const std::string& block) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k].block == block) return k;
  }
  throw ShapeError("draw schema has no block named " + block);
}

std::size_t DrawSchema::block_size(const std::string& block) const {
  std::size_t n = 0;
  for (const auto& name : names) {
    if (name.block == block) ++n;
  }
  return n;
}

bool DrawSchema::has_block(const std::string& block) const {
  for (const auto& name : names) {
    if (name.block == block) return true;
  }
  return false;
}

namespace {

// Type-7 linear interpolation on pre-sorted data, matching common
// statistical software.
double quantile_sorted(const std::vector<double>& x, double prob) {
  const double h = (static_cast<double>(x.size()) - 1.0) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

double quantile(std::vector<double> x, double prob) {
  if (x.empty()) {
    throw EmptyDataError("quantile of empty sample");
  }
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, prob);
}

double split_rhat(const std::vector<const Vec*>& chains) {
  std::vector<std::pair<double, double>> halves;  // (mean, var) per half
  std::size_t min_len = SIZE_MAX;
  for (const Vec* c : chains) min_len = std::min(min_len, c->size());
  const std::size_t half = min_len / 2;
  if (half < 2) return std::numeric_limits<double>::quiet_NaN();
  for (const Vec* c : chains) {
    for (int part = 0; part < 2; ++part) {
      const std::size_t begin = part == 0 ? 0 : half;
      double mean = 0.0;
      for (std::size_t k = 0; k < half; ++k) mean += (*c)[begin + k];
      mean /= static_cast<double>(half);
      double var = 0.0;
      for (std::size_t k = 0; k < half; ++k) {
        const double d = (*c)[begin + k] - mean;
        var += d * d;
      }
      var /= static_cast<double>(half - 1);
      halves.emplace_back(mean, var);
    }
  }
  const double m = static_cast<double>(halves.size());
  const double n = static_cast<double>(half);
  double grand = 0.0;
  for (const auto& h : halves) grand += h.first;
  grand /= m;
  double b = 0.0, w = 0.0;
  for (const auto& h : halves) {
    b += (h.first - grand) * (h.first - grand);
    w += h.second;
  }
  b *= n / (m - 1.0);
  w /= m;
  if (w <= 0.0) {
    // Constant draws (e.g. fixed parameters): nothing to diagnose.
    return 1.0;
  }
  const double var_hat = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_hat / w);
}

PosteriorSummary summarize(DrawSchema schema, std::vector<ChainDraws> chains,
                           bool keep_draws) {
  if (chains.empty() || chains[0].draws.empty()) {
    throw EmptyDataError("summarize: no retained draws");
  }
  const std::size_t dim = schema.size();
  PosteriorSummary out;
  out.schema = std::move(schema);
  out.n_chains = static_cast<unsigned>(chains.size());
  out.n_retained_per_chain = static_cast<long long>(chains[0].draws.size());
  out.stats.resize(dim);
  out.rhat.resize(dim);
  out.per_chain_mean.assign(chains.size(), Vec(dim, 0.0));

  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (const Vec& d : chains[c].draws) {
      if (d.size() != dim) {
        throw ShapeError("summarize: draw length does not match schema");
      }
      for (std::size_t k = 0; k < dim; ++k) out.per_chain_mean[c][k] += d[k];
    }
    const double n = static_cast<double>(chains[c].draws.size());
    for (std::size_t k = 0; k < dim; ++k) out.per_chain_mean[c][k] /= n;
  }

  std::vector<double> pooled;
  std::vector<Vec> scalar_by_chain(chains.size());
  for (std::size_t k = 0; k < dim; ++k) {
    pooled.clear();
    for (std::size_t c = 0; c < chains.size(); ++c) {
      scalar_by_chain[c].clear();
      for (const Vec& d : chains[c].draws) {
        scalar_by_chain[c].push_back(d[k]);
        pooled.push_back(d[k]);
      }
    }
    double mean = 0.0;
    for (double x : pooled) mean += x;
    mean /= static_cast<double>(pooled.size());
    double var = 0.0;
    for (double x : pooled) var += (x - mean) * (x - mean);
    var = pooled.size() > 1 ? var / static_cast<double>(pooled.size() - 1) : 0.0;
    ScalarSummary& s = out.stats[k];
    s.mean = mean;
    s.sd = std::sqrt(var);
    std::sort(pooled.begin(), pooled.end());
    s.q025 = quantile_sorted(pooled, 0.025);
    s.q500 = quantile_sorted(pooled, 0.5);
    s.q975 = quantile_sorted(pooled, 0.975);

    // Convergence of the positive shrinkage weights is monitored on the log
    // scale; everything else on the raw scale.
    if (out.schema.names[k].block.rfind("gamma", 0) == 0) {
      for (auto& v : scalar_by_chain) {
        for (double& x : v) x = std::log(x);
      }
    }
    std::vector<const Vec*> ptrs;
    for (const auto& v : scalar_by_chain) ptrs.push_back(&v);
    out.rhat[k] = split_rhat(ptrs);
  }

  if (keep_draws) {
    out.chains = std::move(chains);
  }
  return out;
}

Vec PosteriorSummary::block_mean(const std::string& block) const {
  const std::size_t off = schema.offset(block);
  const std::size_t n = schema.block_size(block);
  Vec v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = stats[off + k].mean;
  return v;
}

}  // namespace prevcal
