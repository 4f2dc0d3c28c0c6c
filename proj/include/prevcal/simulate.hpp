#ifndef PREVCAL_SIMULATE_HPP
#define PREVCAL_SIMULATE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prevcal/gibbs_ensemble.hpp"
#include "prevcal/gibbs_single.hpp"
#include "prevcal/map_em.hpp"
#include "prevcal/types.hpp"

namespace prevcal {

// Synthetic data generation: predicted labels are drawn from the marginal
// q = M'p, then true labels are back-filled per predicted class from the
// Bayes allocation alpha_ij = m_ij p_i / q_j. In the K-classifier mode the
// true label is drawn first and each classifier predicts conditionally
// independently through its own matrix.

enum class Band { Low, Medium, High, None };

bool band_contains(Band band, double csmfa);
Band band_from_name(const std::string& name);

// The three canonical 4x4 misclassification matrices used throughout the
// benchmark scenarios: identity, two large systematic errors, and many small
// errors (0.6 I + 0.1 J).
Mat canonical_matrix(const std::string& name);  // "M1" | "M2" | "M3"

struct ScenarioSpec {
  std::vector<Mat> m;           // one per classifier (K >= 1)
  std::optional<Vec> p_u;       // drawn flat Dirichlet when absent
  std::optional<Vec> p_l;
  long long n_labeled = 400;    // size of the labeled target set
  long long n_unlabeled = 800;  // size of the unlabeled target set
  Band band = Band::None;       // CSMFA(p_l, p_u) band when pair is drawn
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::size_t classes = 0;
  unsigned k = 0;
  std::vector<int> unlabeled_true;
  std::vector<std::vector<int>> unlabeled_pred;  // [record][classifier]
  std::vector<int> labeled_true;
  std::vector<std::vector<int>> labeled_pred;
  Vec p_u, p_l;
  std::vector<Mat> m;

  PredictionCounts unlabeled_counts(unsigned classifier = 0) const;
  TransferErrorMatrix transfer(unsigned classifier = 0) const;
  EnsembleCounts ensemble_counts() const;
  EnsembleTransferErrors ensemble_transfer() const;
};

// (true_label, predicted_label) pairs for a single classifier.
std::vector<std::pair<int, int>> generate_predictions(const Mat& m,
                                                      const Vec& p,
                                                      long long n_records,
                                                      RngStream& rng);

// Rejection-sample flat-Dirichlet pairs until CSMFA(p_l, p_u) lands in the
// band; gives up after 1e6 tries.
std::pair<Vec, Vec> draw_scenario_pair(Band band, std::size_t c,
                                       RngStream& rng);

SyntheticDataset build_dataset(const ScenarioSpec& spec);

enum class Method {
  Naive,
  CalibratedSingle,
  EnsembleIndependent,
  EnsembleJoint,
  Map,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ExperimentRow {
  long long replicate;
  std::string method;
  std::string metric;   // "csmfa" | "bias" | "ccc"
  int class_index;      // -1 when the metric is scalar
  double value;
};

// Replicated benchmark: regenerates the scenario per replicate (fresh
// (p_l, p_u) pair when a band is set), runs each method, and emits one long
// table of CSMFA, per-class bias, and chance-corrected concordance.
std::vector<ExperimentRow> run_experiment(const ScenarioSpec& spec,
                                          long long replicates,
                                          const std::vector<Method>& methods,
                                          const Hyperparams& hp,
                                          const ChainConfig& mcmc_cfg,
                                          const EmConfig& em_cfg);

}  // namespace prevcal

#endif
