#ifndef PREVCAL_SUMMARY_HPP
#define PREVCAL_SUMMARY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prevcal/types.hpp"

namespace prevcal {

// Name of one tracked scalar: block plus optional row/col indices (-1 unused).
struct ParamName {
  std::string block;
  int row = -1;
  int col = -1;

  std::string dotted() const;
};

struct DrawSchema {
  std::vector<ParamName> names;

  std::size_t size() const { return names.size(); }
  void add_vector(const std::string& block, std::size_t n);
  void add_matrix(const std::string& block, std::size_t r, std::size_t c);
  // Offset of the first scalar of a block; throws if absent.
  std::size_t offset(const std::string& block) const;
  std::size_t block_size(const std::string& block) const;
  bool has_block(const std::string& block) const;
};

// Retained draws of one chain; draws[k] is a flat vector in schema order.
struct ChainDraws {
  std::vector<Vec> draws;
};

struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
};

struct PosteriorSummary {
  DrawSchema schema;
  std::vector<ScalarSummary> stats;         // per scalar, pooled over chains
  std::vector<double> rhat;                 // split-chain, per scalar
  std::vector<Vec> per_chain_mean;          // [chain][scalar]
  std::vector<ParamName> accept_names;      // MH-updated scalars
  std::vector<Vec> accept_rate;             // [chain][accept scalar]
  std::vector<ChainDraws> chains;           // retained draws (may be empty)
  std::uint64_t seed = 0;
  unsigned n_chains = 0;
  long long n_retained_per_chain = 0;

  // Pooled posterior mean of one block as a vector.
  Vec block_mean(const std::string& block) const;
};

double quantile(std::vector<double> sorted_or_not, double prob);

// Split-chain potential scale reduction for one scalar; each chain's draws
// are halved so a single chain still yields a diagnostic.
double split_rhat(const std::vector<const Vec*>& per_chain_scalar_draws);

PosteriorSummary summarize(DrawSchema schema, std::vector<ChainDraws> chains,
                           bool keep_draws);

}  // namespace prevcal

#endif
