#ifndef PREVCAL_IO_HPP
#define PREVCAL_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "prevcal/covariate.hpp"
#include "prevcal/gibbs_ensemble.hpp"
#include "prevcal/individual.hpp"
#include "prevcal/simulate.hpp"
#include "prevcal/summary.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// CSV layouts (UTF-8, comma separated, header required, no quoting):
//   unlabeled: record_id, pred_<alg1>[, pred_<alg2>...][, covariate columns]
//   labeled:   record_id, true_label, pred_<alg1>[, pred_<alg2>...]

struct UnlabeledData {
  std::vector<std::string> algorithms;        // in header order
  std::vector<std::vector<int>> predictions;  // [record][classifier]
  std::vector<std::string> covariate_names;
  std::vector<Vec> covariates;  // [record][covariate], parsed as reals

  EnsembleCounts to_ensemble_counts(std::size_t c) const;
  PredictionCounts to_counts(std::size_t c, unsigned classifier = 0) const;
};

struct LabeledData {
  std::vector<std::string> algorithms;
  std::vector<int> true_labels;
  std::vector<std::vector<int>> predictions;

  EnsembleTransferErrors to_transfer_errors(std::size_t c) const;
  TransferErrorMatrix to_transfer(std::size_t c, unsigned classifier = 0) const;
};

UnlabeledData load_unlabeled(const std::string& path,
                             const ClassLabelMap& labels);
LabeledData load_labeled(const std::string& path, const ClassLabelMap& labels);

// Grouping preprocessor for the covariate model: bins records with identical
// covariate rows (so a continuous covariate gives one group per distinct
// value) and prepends an intercept to the design.
struct GroupedCovariates {
  DesignMatrix design;      // G x (1 + #covariates)
  StratifiedCounts counts;  // G x C
};
GroupedCovariates group_by_covariates(const UnlabeledData& data, std::size_t c,
                                      unsigned classifier = 0);

// 17 significant digits; round-trips doubles exactly.
std::string format_double(double x);

void write_posterior_summary(const std::string& path,
                             const PosteriorSummary& summary,
                             const ClassLabelMap& labels,
                             const std::vector<std::string>& term_names = {});

void write_draws(const std::string& path, const PosteriorSummary& summary);

// Reads a wide draws.csv back into a summary-shaped object (schema + one
// pseudo-chain per chain column value) for post-hoc individual prediction.
PosteriorSummary read_draws(const std::string& path);

void write_diagnostics_json(const std::string& path,
                            const PosteriorSummary& summary,
                            const std::map<std::string, std::string>& config_echo);

void write_results(const std::string& path,
                   const std::vector<ExperimentRow>& rows,
                   const ClassLabelMap& labels);

void write_dataset(const std::string& unlabeled_path,
                   const std::string& labeled_path, const SyntheticDataset& ds,
                   const ClassLabelMap& labels);

void write_individual_posteriors(
    const std::string& path,
    const std::vector<std::pair<std::vector<int>, IndividualPosterior>>& rows,
    const ClassLabelMap& labels);

void write_metrics(const std::string& path,
                   const std::vector<std::pair<std::string, double>>& rows);

void write_map_estimate(const std::string& path, const EmState& state,
                        const ClassLabelMap& labels);

}  // namespace prevcal

#endif
