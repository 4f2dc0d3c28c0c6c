#include "prevcal/gibbs_ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <string>
#include <thread>

#include "prevcal/distributions.hpp"
#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"

namespace prevcal {

EnsembleCounts EnsembleCounts::from_records(
    std::size_t c, const std::vector<std::vector<int>>& records) {
  if (records.empty()) {
    throw EmptyDataError("ensemble counts: no records");
  }
  const std::size_t k = records[0].size();
  if (k == 0) {
    throw ShapeError("ensemble counts: records carry no predictions");
  }
  std::map<std::vector<int>, long long> tally;
  EnsembleCounts out;
  out.v.assign(k, IVec(c, 0));
  for (const auto& rec : records) {
    if (rec.size() != k) {
      throw ShapeError("ensemble counts: ragged prediction records");
    }
    for (std::size_t a = 0; a < k; ++a) {
      if (rec[a] < 0 || rec[a] >= static_cast<int>(c)) {
        throw ParameterError("ensemble counts: class index out of range");
      }
      ++out.v[a][rec[a]];
    }
    ++tally[rec];
  }
  out.combos.assign(tally.begin(), tally.end());
  out.total = static_cast<long long>(records.size());
  return out;
}

EnsembleCounts EnsembleCounts::from_joint(
    std::size_t c, unsigned k,
    std::vector<std::pair<std::vector<int>, long long>> combos) {
  EnsembleCounts out;
  out.v.assign(k, IVec(c, 0));
  std::sort(combos.begin(), combos.end());
  for (const auto& [pattern, count] : combos) {
    if (pattern.size() != k) {
      throw ShapeError("ensemble counts: pattern length != K");
    }
    if (count < 0) {
      throw ParameterError("ensemble counts: negative combination count");
    }
    if (count == 0) continue;  // zero combinations are never stored
    for (unsigned a = 0; a < k; ++a) {
      if (pattern[a] < 0 || pattern[a] >= static_cast<int>(c)) {
        throw ParameterError("ensemble counts: class index out of range");
      }
      out.v[a][pattern[a]] += count;
    }
    out.combos.emplace_back(pattern, count);
    out.total += count;
  }
  return out;
}

EnsembleCounts EnsembleCounts::from_marginals(std::vector<IVec> v) {
  if (v.empty() || v[0].empty()) {
    throw ShapeError("ensemble counts: empty marginals");
  }
  EnsembleCounts out;
  out.total = 0;
  for (const auto& counts : v) {
    if (counts.size() != v[0].size()) {
      throw ShapeError("ensemble counts: marginal lengths disagree");
    }
    long long n = 0;
    for (long long x : counts) {
      if (x < 0) throw ParameterError("ensemble counts: negative count");
      n += x;
    }
    if (out.total == 0) {
      out.total = n;
    } else if (n != out.total) {
      throw ShapeError("ensemble counts: classifiers scored different N");
    }
  }
  out.v = std::move(v);
  return out;
}

EnsembleTransferErrors EnsembleTransferErrors::checked(
    std::vector<TransferErrorMatrix> t) {
  // Shared row sums (one labeled set scored by every classifier) hold by
  // construction when the matrices come from one file; hand-built fixtures
  // may legitimately differ, so only shapes are enforced here.
  if (t.empty()) {
    throw ShapeError("ensemble transfer errors: need at least one matrix");
  }
  for (const auto& m : t) {
    if (m.size() != t[0].size()) {
      throw ShapeError("ensemble transfer errors: sizes disagree");
    }
  }
  return EnsembleTransferErrors{std::move(t)};
}

std::vector<IVec> joint_update_b(const EnsembleState& state,
                                 const EnsembleCounts& counts,
                                 RngStream& rng) {
  const std::size_t c = state.p.size();
  std::vector<IVec> out;
  out.reserve(counts.combos.size());
  Vec probs(c);
  for (const auto& [pattern, y] : counts.combos) {
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      double u = state.p[i];
      for (unsigned a = 0; a < counts.k(); ++a) {
        u *= state.m[a](i, static_cast<std::size_t>(pattern[a]));
      }
      probs[i] = u;
      total += u;
    }
    if (!(total > 0.0)) {
      throw DegenerateStateError(
          "joint_update_b: zero allocation mass for an observed prediction "
          "combination");
    }
    for (double& x : probs) x /= total;
    out.push_back(draw_multinomial(y, probs, rng));
  }
  return out;
}

std::vector<Mat> joint_update_m(const EnsembleState& state,
                                const EnsembleCounts& counts,
                                const EnsembleTransferErrors& errors,
                                const Hyperparams& hp, RngStream& rng) {
  const std::size_t c = state.p.size();
  const unsigned k = counts.k();
  // Marginalize the allocations over the other classifiers' coordinates.
  std::vector<Mat> occ(k, Mat(c, c, 0.0));
  for (std::size_t idx = 0; idx < counts.combos.size(); ++idx) {
    const auto& pattern = counts.combos[idx].first;
    const IVec& b = state.b_joint[idx];
    for (unsigned a = 0; a < k; ++a) {
      const auto j = static_cast<std::size_t>(pattern[a]);
      for (std::size_t i = 0; i < c; ++i) {
        occ[a](i, j) += static_cast<double>(b[i]);
      }
    }
  }
  std::vector<Mat> out(k, Mat(c, c));
  Vec alpha(c);
  for (unsigned a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        alpha[j] = occ[a](i, j) + static_cast<double>(errors.t[a].t(i, j)) +
                   state.gamma[a][i] * hp.epsilon +
                   (i == j ? state.gamma[a][i] : 0.0);
      }
      const Vec row = draw_dirichlet(alpha, rng);
      for (std::size_t j = 0; j < c; ++j) out[a](i, j) = row[j];
    }
  }
  return out;
}

Vec joint_update_p(const EnsembleState& state, const Hyperparams& hp,
                   RngStream& rng) {
  const std::size_t c = state.p.size();
  Vec alpha(c, hp.delta);
  for (const IVec& b : state.b_joint) {
    for (std::size_t i = 0; i < c; ++i) {
      alpha[i] += static_cast<double>(b[i]);
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (!(alpha[i] > 0.0)) {
      throw DegenerateStateError(
          "joint_update_p: class " + std::to_string(i + 1) +
          " has no allocated counts and delta = 0");
    }
  }
  return draw_dirichlet(alpha, rng);
}

std::vector<Vec> ensemble_update_gamma(const EnsembleState& state,
                                       const Hyperparams& hp,
                                       const std::vector<Vec>& proposal_sd,
                                       RngStream& rng,
                                       std::vector<int>* accepted) {
  const std::size_t c = state.p.size();
  const unsigned k = static_cast<unsigned>(state.m.size());
  std::vector<Vec> out(k, Vec(c));
  if (accepted) accepted->assign(static_cast<std::size_t>(k) * c, 0);
  for (unsigned a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < c; ++i) {
      const auto target = [&](double g) {
        return log_gamma_conditional(g, state.m[a], i, hp);
      };
      const MhResult r = mh_lognormal_step(state.gamma[a][i], target,
                                           proposal_sd[a][i], rng);
      out[a][i] = r.value;
      if (accepted) (*accepted)[a * c + i] = r.accepted ? 1 : 0;
    }
  }
  return out;
}

namespace {

struct EnsembleChainOut {
  ChainDraws draws;
  Vec accept_rate;  // K*C acceptance rates in (classifier, class) order
};

enum class EnsembleKind { Joint, Independent };

void validate_ensemble_inputs(const EnsembleCounts& counts,
                              const EnsembleTransferErrors& errors,
                              const Hyperparams& hp, const ChainConfig& cfg,
                              EnsembleKind kind) {
  cfg.validate();
  hp.validate();
  if (cfg.fixed_gamma && cfg.fixed_gamma->size() != counts.c()) {
    throw ShapeError("fixed gamma vector has wrong length");
  }
  if (counts.k() == 0 || counts.k() != errors.k()) {
    throw ShapeError("ensemble: classifier counts and transfer matrices disagree");
  }
  if (counts.c() != errors.c()) {
    throw ShapeError("ensemble: class counts disagree");
  }
  if (counts.total < 1) {
    throw EmptyDataError("ensemble: no unlabeled predictions");
  }
  if (kind == EnsembleKind::Joint && !counts.has_joint()) {
    throw ParameterError(
        "joint ensemble needs the observed prediction combinations, not just "
        "marginal counts");
  }
  if (kind == EnsembleKind::Joint) {
    // Marginalization consistency of the sparse map.
    std::vector<IVec> recon(counts.k(), IVec(counts.c(), 0));
    for (const auto& [pattern, y] : counts.combos) {
      for (unsigned a = 0; a < counts.k(); ++a) {
        recon[a][static_cast<std::size_t>(pattern[a])] += y;
      }
    }
    for (unsigned a = 0; a < counts.k(); ++a) {
      if (recon[a] != counts.v[a]) {
        throw ParameterError(
            "ensemble: joint combination counts do not marginalize to the "
            "per-classifier counts");
      }
    }
  }
  if (hp.delta == 0.0) {
    for (unsigned a = 0; a < counts.k(); ++a) {
      for (std::size_t i = 0; i < counts.c(); ++i) {
        if (counts.v[a][i] == 0) {
          throw ParameterError(
              "ensemble: delta = 0 requires every predicted-class count to "
              "be positive for every classifier");
        }
      }
    }
  }
}

EnsembleState ensemble_initial_state(const EnsembleCounts& counts,
                                     const EnsembleTransferErrors& errors) {
  const std::size_t c = counts.c();
  const unsigned k = counts.k();
  EnsembleState state;
  // Start p at the average of the classifiers' naive estimates.
  state.p.assign(c, 0.0);
  for (unsigned a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < c; ++i) {
      state.p[i] += static_cast<double>(counts.v[a][i]) /
                    static_cast<double>(counts.total) / k;
    }
  }
  state.gamma.assign(k, Vec(c, 1.0));
  for (unsigned a = 0; a < k; ++a) {
    state.m.push_back(shrinkage_estimate(errors.t[a], state.gamma[a]).m);
  }
  return state;
}

void flatten_ensemble(const EnsembleState& state, Vec& out) {
  out.clear();
  out.insert(out.end(), state.p.begin(), state.p.end());
  for (const Mat& m : state.m) {
    out.insert(out.end(), m.a.begin(), m.a.end());
  }
  for (const Vec& g : state.gamma) {
    out.insert(out.end(), g.begin(), g.end());
  }
}

EnsembleChainOut run_one_ensemble_chain(const EnsembleCounts& counts,
                                        const EnsembleTransferErrors& errors,
                                        const Hyperparams& hp,
                                        const ChainConfig& cfg,
                                        EnsembleKind kind, unsigned chain_id) {
  RngStream rng(cfg.seed, chain_id);
  const std::size_t c = counts.c();
  const unsigned k = counts.k();
  EnsembleState state = ensemble_initial_state(counts, errors);
  const bool sample_gamma = !cfg.fixed_gamma.has_value();
  if (cfg.fixed_gamma) {
    // Oracle/testing variant: the same fixed weights for every classifier.
    for (auto& g : state.gamma) g = *cfg.fixed_gamma;
    state.m.clear();
    for (unsigned a = 0; a < k; ++a) {
      state.m.push_back(shrinkage_estimate(errors.t[a], state.gamma[a]).m);
    }
  }
  std::vector<Vec> sd(k, Vec(c, cfg.mh_proposal_sd));
  std::vector<int> accepted;
  std::vector<PredictionCounts> marginals;
  for (unsigned a = 0; a < k; ++a) {
    marginals.push_back(PredictionCounts::checked(counts.v[a]));
  }

  const auto one_sweep = [&]() {
    if (kind == EnsembleKind::Joint) {
      state.b_joint = joint_update_b(state, counts, rng);
      state.m = joint_update_m(state, counts, errors, hp, rng);
      state.p = joint_update_p(state, hp, rng);
    } else {
      state.b_indep.resize(k);
      for (unsigned a = 0; a < k; ++a) {
        ChainState view;
        view.p = state.p;
        view.m = state.m[a];
        state.b_indep[a] = update_b(view, marginals[a], rng);
      }
      for (unsigned a = 0; a < k; ++a) {
        ChainState view;
        view.b = state.b_indep[a];
        view.gamma = state.gamma[a];
        state.m[a] = update_m(view, errors.t[a], hp, rng);
      }
      // p pools the allocation counts of every classifier.
      Vec alpha(c, hp.delta);
      for (unsigned a = 0; a < k; ++a) {
        for (std::size_t i = 0; i < c; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            alpha[i] += static_cast<double>(state.b_indep[a](i, j));
          }
        }
      }
      for (std::size_t i = 0; i < c; ++i) {
        if (!(alpha[i] > 0.0)) {
          throw DegenerateStateError(
              "independent ensemble: class " + std::to_string(i + 1) +
              " has no allocated counts and delta = 0");
        }
      }
      state.p = draw_dirichlet(alpha, rng);
    }
    if (sample_gamma) {
      state.gamma = ensemble_update_gamma(state, hp, sd, rng, &accepted);
    } else {
      accepted.assign(static_cast<std::size_t>(k) * c, 0);
    }
  };

  constexpr long long kBatch = 50;
  std::vector<long long> batch_acc(static_cast<std::size_t>(k) * c, 0);
  long long batch_index = 0;
  for (long long it = 0; it < cfg.n_burnin; ++it) {
    one_sweep();
    if (cfg.adapt_mh && sample_gamma) {
      for (std::size_t s = 0; s < batch_acc.size(); ++s) {
        batch_acc[s] += accepted[s];
      }
      if ((it + 1) % kBatch == 0) {
        ++batch_index;
        const double step =
            std::min(0.05, 1.0 / std::sqrt(static_cast<double>(batch_index)));
        for (unsigned a = 0; a < k; ++a) {
          for (std::size_t i = 0; i < c; ++i) {
            const double rate = static_cast<double>(batch_acc[a * c + i]) /
                                static_cast<double>(kBatch);
            sd[a][i] *= std::exp(rate > 0.44 ? step : -step);
            batch_acc[a * c + i] = 0;
          }
        }
      }
    }
  }

  EnsembleChainOut out;
  out.draws.draws.reserve(static_cast<std::size_t>(cfg.n_samples));
  std::vector<long long> acc_count(static_cast<std::size_t>(k) * c, 0);
  const long long total = cfg.n_samples * cfg.thin;
  Vec flat;
  for (long long it = 0; it < total; ++it) {
    one_sweep();
    for (std::size_t s = 0; s < acc_count.size(); ++s) {
      acc_count[s] += accepted[s];
    }
    if ((it + 1) % cfg.thin == 0) {
      flatten_ensemble(state, flat);
      for (double x : flat) {
        if (!std::isfinite(x)) {
          throw InvalidStateError("ensemble chain " + std::to_string(chain_id) +
                                  " produced a non-finite draw at iteration " +
                                  std::to_string(it + 1));
        }
      }
      out.draws.draws.push_back(flat);
    }
  }
  out.accept_rate.resize(acc_count.size());
  for (std::size_t s = 0; s < acc_count.size(); ++s) {
    out.accept_rate[s] =
        static_cast<double>(acc_count[s]) / static_cast<double>(total);
  }
  return out;
}

PosteriorSummary run_ensemble(const EnsembleCounts& counts,
                              const EnsembleTransferErrors& errors,
                              const Hyperparams& hp, const ChainConfig& cfg,
                              EnsembleKind kind) {
  validate_ensemble_inputs(counts, errors, hp, cfg, kind);
  const std::size_t c = counts.c();
  const unsigned k = counts.k();

  std::vector<EnsembleChainOut> results(cfg.n_chains);
  std::vector<std::exception_ptr> chain_errors(cfg.n_chains);
  std::vector<std::thread> workers;
  workers.reserve(cfg.n_chains);
  for (unsigned chain = 0; chain < cfg.n_chains; ++chain) {
    workers.emplace_back([&, chain]() {
      try {
        results[chain] =
            run_one_ensemble_chain(counts, errors, hp, cfg, kind, chain);
      } catch (...) {
        chain_errors[chain] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : chain_errors) {
    if (e) std::rethrow_exception(e);
  }

  DrawSchema schema;
  schema.add_vector("p", c);
  for (unsigned a = 0; a < k; ++a) {
    schema.add_matrix("m" + std::to_string(a + 1), c, c);
  }
  for (unsigned a = 0; a < k; ++a) {
    schema.add_vector("gamma" + std::to_string(a + 1), c);
  }

  std::vector<ChainDraws> chains;
  chains.reserve(cfg.n_chains);
  for (auto& r : results) chains.push_back(std::move(r.draws));
  PosteriorSummary summary =
      summarize(std::move(schema), std::move(chains), cfg.keep_draws);
  summary.seed = cfg.seed;
  for (unsigned a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < c; ++i) {
      summary.accept_names.push_back(
          {"gamma" + std::to_string(a + 1), static_cast<int>(i), -1});
    }
  }
  for (const auto& r : results) summary.accept_rate.push_back(r.accept_rate);
  return summary;
}

}  // namespace

PosteriorSummary run_joint(const EnsembleCounts& counts,
                           const EnsembleTransferErrors& errors,
                           const Hyperparams& hp, const ChainConfig& cfg) {
  return run_ensemble(counts, errors, hp, cfg, EnsembleKind::Joint);
}

PosteriorSummary run_independent(const EnsembleCounts& counts,
                                 const EnsembleTransferErrors& errors,
                                 const Hyperparams& hp, const ChainConfig& cfg) {
  return run_ensemble(counts, errors, hp, cfg, EnsembleKind::Independent);
}

}  // namespace prevcal
