#include "prevcal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "prevcal/distributions.hpp"
#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"
#include "prevcal/individual.hpp"
#include "prevcal/metrics.hpp"

namespace prevcal {

bool band_contains(Band band, double csmfa) {
  switch (band) {
    case Band::Low:
      return csmfa < 0.4;
    case Band::Medium:
      return csmfa >= 0.4 && csmfa <= 0.6;
    case Band::High:
      return csmfa > 0.6;
    case Band::None:
      return true;
  }
  return false;
}

Band band_from_name(const std::string& name) {
  if (name == "low") return Band::Low;
  if (name == "medium") return Band::Medium;
  if (name == "high") return Band::High;
  if (name == "none") return Band::None;
  throw InputError("unknown band: " + name);
}

Mat canonical_matrix(const std::string& name) {
  if (name == "M1") {
    return Mat::identity(4);
  }
  if (name == "M2") {
    Mat m(4, 4, 0.0);
    m(0, 0) = 1.0;
    m(1, 0) = 0.65;
    m(1, 1) = 0.35;
    m(2, 2) = 0.5;
    m(2, 3) = 0.5;
    m(3, 3) = 1.0;
    return m;
  }
  if (name == "M3") {
    Mat m(4, 4, 0.1);
    for (std::size_t i = 0; i < 4; ++i) m(i, i) = 0.7;  // 0.6 I + 0.1 J
    return m;
  }
  throw InputError("unknown canonical matrix: " + name);
}

namespace {

int draw_categorical(const Vec& probs, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace

std::vector<std::pair<int, int>> generate_predictions(const Mat& m,
                                                      const Vec& p,
                                                      long long n_records,
                                                      RngStream& rng) {
  const std::size_t c = p.size();
  if (m.rows != c || m.cols != c) {
    throw ShapeError("generate_predictions: matrix and p disagree");
  }
  const Vec q = predicted_marginal(MisclassMatrix::checked(m),
                                   ClassProbs::checked(p))
                    .values;
  const IVec pred_counts = draw_multinomial(n_records, q, rng);
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(n_records));
  Vec alpha(c);
  for (std::size_t j = 0; j < c; ++j) {
    if (pred_counts[j] == 0) continue;
    if (!(q[j] > 0.0)) {
      throw DegenerateStateError(
          "generate_predictions: predicted class with zero marginal");
    }
    for (std::size_t i = 0; i < c; ++i) {
      alpha[i] = m(i, j) * p[i] / q[j];
    }
    const IVec true_counts = draw_multinomial(pred_counts[j], alpha, rng);
    for (std::size_t i = 0; i < c; ++i) {
      for (long long r = 0; r < true_counts[i]; ++r) {
        out.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return out;
}

std::pair<Vec, Vec> draw_scenario_pair(Band band, std::size_t c,
                                       RngStream& rng) {
  const Vec flat(c, 1.0);
  for (long long tries = 0; tries < 1000000; ++tries) {
    Vec p_l = draw_dirichlet(flat, rng);
    Vec p_u = draw_dirichlet(flat, rng);
    if (band_contains(band, csmf_accuracy(p_l, p_u))) {
      return {std::move(p_l), std::move(p_u)};
    }
  }
  throw InvalidStateError(
      "draw_scenario_pair: rejection budget exceeded for the requested band");
}

namespace {

// K-classifier mode: true labels first, then conditionally independent
// predictions through each classifier's matrix.
void generate_multi(const std::vector<Mat>& m, const Vec& p, long long n,
                    RngStream& rng, std::vector<int>& truth,
                    std::vector<std::vector<int>>& preds) {
  const std::size_t c = p.size();
  const IVec true_counts = draw_multinomial(n, p, rng);
  truth.clear();
  preds.clear();
  Vec row(c);
  for (std::size_t i = 0; i < c; ++i) {
    for (long long r = 0; r < true_counts[i]; ++r) {
      truth.push_back(static_cast<int>(i));
      std::vector<int> rec(m.size());
      for (std::size_t a = 0; a < m.size(); ++a) {
        for (std::size_t j = 0; j < c; ++j) row[j] = m[a](i, j);
        rec[a] = draw_categorical(row, rng);
      }
      preds.push_back(std::move(rec));
    }
  }
}

}  // namespace

SyntheticDataset build_dataset(const ScenarioSpec& spec) {
  if (spec.m.empty()) {
    throw ParameterError("scenario needs at least one classifier matrix");
  }
  const std::size_t c = spec.m[0].rows;
  std::vector<MisclassMatrix> checked;
  for (const Mat& m : spec.m) {
    if (m.rows != c || m.cols != c) {
      throw ShapeError("scenario matrices must share one class space");
    }
    checked.push_back(MisclassMatrix::checked(m));
  }
  if (spec.n_unlabeled < 1 || spec.n_labeled < 0) {
    throw ParameterError("scenario needs n_unlabeled >= 1 and n_labeled >= 0");
  }

  RngStream rng(spec.seed, 0x5Du);
  SyntheticDataset ds;
  ds.classes = c;
  ds.k = static_cast<unsigned>(spec.m.size());
  ds.m = spec.m;

  if (spec.p_u && spec.p_l) {
    ds.p_u = ClassProbs::checked(*spec.p_u).values;
    ds.p_l = ClassProbs::checked(*spec.p_l).values;
  } else if (spec.band != Band::None) {
    auto pair = draw_scenario_pair(spec.band, c, rng);
    ds.p_l = std::move(pair.first);
    ds.p_u = std::move(pair.second);
  } else {
    const Vec flat(c, 1.0);
    ds.p_l = spec.p_l ? ClassProbs::checked(*spec.p_l).values
                      : draw_dirichlet(flat, rng);
    ds.p_u = spec.p_u ? ClassProbs::checked(*spec.p_u).values
                      : draw_dirichlet(flat, rng);
  }

  if (ds.k == 1) {
    for (const auto& [truth, pred] :
         generate_predictions(spec.m[0], ds.p_u, spec.n_unlabeled, rng)) {
      ds.unlabeled_true.push_back(truth);
      ds.unlabeled_pred.push_back({pred});
    }
    for (const auto& [truth, pred] :
         generate_predictions(spec.m[0], ds.p_l, spec.n_labeled, rng)) {
      ds.labeled_true.push_back(truth);
      ds.labeled_pred.push_back({pred});
    }
  } else {
    generate_multi(spec.m, ds.p_u, spec.n_unlabeled, rng, ds.unlabeled_true,
                   ds.unlabeled_pred);
    generate_multi(spec.m, ds.p_l, spec.n_labeled, rng, ds.labeled_true,
                   ds.labeled_pred);
  }
  return ds;
}

PredictionCounts SyntheticDataset::unlabeled_counts(unsigned classifier) const {
  IVec v(classes, 0);
  for (const auto& rec : unlabeled_pred) {
    ++v[static_cast<std::size_t>(rec[classifier])];
  }
  return PredictionCounts::checked(std::move(v));
}

TransferErrorMatrix SyntheticDataset::transfer(unsigned classifier) const {
  IMat t(classes, classes, 0);
  for (std::size_t r = 0; r < labeled_true.size(); ++r) {
    ++t(static_cast<std::size_t>(labeled_true[r]),
        static_cast<std::size_t>(labeled_pred[r][classifier]));
  }
  return TransferErrorMatrix::checked(std::move(t));
}

EnsembleCounts SyntheticDataset::ensemble_counts() const {
  return EnsembleCounts::from_records(classes, unlabeled_pred);
}

EnsembleTransferErrors SyntheticDataset::ensemble_transfer() const {
  std::vector<TransferErrorMatrix> t;
  for (unsigned a = 0; a < k; ++a) t.push_back(transfer(a));
  return EnsembleTransferErrors::checked(std::move(t));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Naive:
      return "naive";
    case Method::CalibratedSingle:
      return "calibrated-single";
    case Method::EnsembleIndependent:
      return "calibrated-ensemble-independent";
    case Method::EnsembleJoint:
      return "calibrated-ensemble-joint";
    case Method::Map:
      return "map";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::Naive, Method::CalibratedSingle,
                   Method::EnsembleIndependent, Method::EnsembleJoint,
                   Method::Map}) {
    if (method_name(m) == name) return m;
  }
  throw InputError("unknown method: " + name);
}

namespace {

struct MethodOutput {
  Vec p_hat;
  std::vector<int> individual;  // one predicted class per unlabeled record
};

std::vector<int> classify_by_pattern(
    const SyntheticDataset& ds,
    const std::function<int(const std::vector<int>&)>& assign) {
  std::map<std::vector<int>, int> cache;
  std::vector<int> out;
  out.reserve(ds.unlabeled_pred.size());
  for (const auto& rec : ds.unlabeled_pred) {
    auto it = cache.find(rec);
    if (it == cache.end()) {
      it = cache.emplace(rec, assign(rec)).first;
    }
    out.push_back(it->second);
  }
  return out;
}

int argmax(const Vec& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

MethodOutput evaluate_method(Method method, const SyntheticDataset& ds,
                             const Hyperparams& hp, const ChainConfig& base_cfg,
                             const EmConfig& em_cfg, std::uint64_t seed) {
  MethodOutput out;
  ChainConfig cfg = base_cfg;
  cfg.seed = seed;
  switch (method) {
    case Method::Naive: {
      out.p_hat = naive_estimate(ds.unlabeled_counts(0)).values;
      out.individual = classify_by_pattern(
          ds, [](const std::vector<int>& rec) { return rec[0]; });
      break;
    }
    case Method::CalibratedSingle: {
      cfg.keep_draws = true;
      const PosteriorSummary s =
          run_chain(ds.unlabeled_counts(0), ds.transfer(0), hp, cfg);
      out.p_hat = s.block_mean("p");
      out.individual = classify_by_pattern(ds, [&](const std::vector<int>& rec) {
        return argmax(individual_posterior_single(rec[0], s).probs);
      });
      break;
    }
    case Method::EnsembleIndependent:
    case Method::EnsembleJoint: {
      cfg.keep_draws = true;
      const EnsembleCounts counts = ds.ensemble_counts();
      const EnsembleTransferErrors errors = ds.ensemble_transfer();
      const PosteriorSummary s = method == Method::EnsembleJoint
                                     ? run_joint(counts, errors, hp, cfg)
                                     : run_independent(counts, errors, hp, cfg);
      out.p_hat = s.block_mean("p");
      out.individual = classify_by_pattern(ds, [&](const std::vector<int>& rec) {
        return argmax(individual_posterior_ensemble(rec, s).probs);
      });
      break;
    }
    case Method::Map: {
      const EmResult r =
          run_em(ds.unlabeled_counts(0), ds.transfer(0), hp, em_cfg);
      out.p_hat = r.state.p;
      const Mat& m = r.state.m;
      const Vec& p = r.state.p;
      out.individual = classify_by_pattern(ds, [&](const std::vector<int>& rec) {
        const auto j = static_cast<std::size_t>(rec[0]);
        Vec w(ds.classes);
        for (std::size_t i = 0; i < ds.classes; ++i) w[i] = m(i, j) * p[i];
        return argmax(w);
      });
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ScenarioSpec& spec,
                                          long long replicates,
                                          const std::vector<Method>& methods,
                                          const Hyperparams& hp,
                                          const ChainConfig& mcmc_cfg,
                                          const EmConfig& em_cfg) {
  std::vector<ExperimentRow> rows;
  for (long long rep = 0; rep < replicates; ++rep) {
    ScenarioSpec s = spec;
    s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
    const SyntheticDataset ds = build_dataset(s);
    std::vector<std::pair<int, int>> truth_pred;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Method method = methods[mi];
      const MethodOutput res =
          evaluate_method(method, ds, hp, mcmc_cfg, em_cfg,
                          derive_seed(s.seed, 1000 + mi));
      const std::string name = method_name(method);
      rows.push_back(
          {rep, name, "csmfa", -1, csmf_accuracy(res.p_hat, ds.p_u)});
      for (std::size_t i = 0; i < ds.classes; ++i) {
        rows.push_back({rep, name, "bias", static_cast<int>(i),
                        res.p_hat[i] - ds.p_u[i]});
      }
      truth_pred.clear();
      for (std::size_t r = 0; r < ds.unlabeled_true.size(); ++r) {
        truth_pred.emplace_back(ds.unlabeled_true[r], res.individual[r]);
      }
      try {
        const double value =
            ccc(ConfusionCounts::from_pairs(ds.classes, truth_pred),
                CccVariant::Literature);
        rows.push_back({rep, name, "ccc", -1, value});
      } catch (const UndefinedMetricError&) {
        // A class can be absent from a small replicate; skip the row.
      }
    }
  }
  return rows;
}

}  // namespace prevcal
