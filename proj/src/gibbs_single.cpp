#include "prevcal/gibbs_single.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "prevcal/distributions.hpp"
#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"

namespace prevcal {

void ChainConfig::validate() const {
  if (n_burnin < 0 || n_samples < 1 || thin < 1) {
    throw ParameterError("chain config: need n_burnin >= 0, n_samples >= 1, thin >= 1");
  }
  if (n_chains < 1) {
    throw ParameterError("chain config: need at least one chain");
  }
  if (!(mh_proposal_sd >= 0.0)) {
    throw ParameterError("chain config: mh_proposal_sd must be >= 0");
  }
}

IMat update_b(const ChainState& state, const PredictionCounts& v,
              RngStream& rng) {
  const std::size_t c = v.size();
  IMat b(c, c, 0);
  Vec probs(c);
  for (std::size_t j = 0; j < c; ++j) {
    if (v.v[j] == 0) continue;
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      probs[i] = state.m(i, j) * state.p[i];
      total += probs[i];
    }
    if (!(total > 0.0)) {
      throw DegenerateStateError(
          "update_b: zero allocation mass for predicted class " +
          std::to_string(j + 1));
    }
    for (std::size_t i = 0; i < c; ++i) probs[i] /= total;
    const IVec col = draw_multinomial(v.v[j], probs, rng);
    for (std::size_t i = 0; i < c; ++i) b(i, j) = col[i];
  }
  return b;
}

Mat update_m(const ChainState& state, const TransferErrorMatrix& t,
             const Hyperparams& hp, RngStream& rng) {
  const std::size_t c = t.size();
  Mat m(c, c);
  Vec alpha(c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      alpha[j] = static_cast<double>(state.b(i, j)) +
                 static_cast<double>(t.t(i, j)) +
                 state.gamma[i] * hp.epsilon + (i == j ? state.gamma[i] : 0.0);
    }
    const Vec row = draw_dirichlet(alpha, rng);
    for (std::size_t j = 0; j < c; ++j) m(i, j) = row[j];
  }
  return m;
}

Vec update_p(const ChainState& state, const Hyperparams& hp, RngStream& rng) {
  const std::size_t c = state.b.rows;
  Vec alpha(c);
  for (std::size_t i = 0; i < c; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row_sum += static_cast<double>(state.b(i, j));
    }
    alpha[i] = row_sum + hp.delta;
    if (!(alpha[i] > 0.0)) {
      throw DegenerateStateError(
          "update_p: class " + std::to_string(i + 1) +
          " has no allocated counts and delta = 0");
    }
  }
  return draw_dirichlet(alpha, rng);
}

double log_gamma_conditional(double gamma, const Mat& m, std::size_t i,
                             const Hyperparams& hp) {
  if (!(gamma > 0.0)) {
    return -std::numeric_limits<double>::infinity();
  }
  const double c = static_cast<double>(m.rows);
  const double eps = hp.epsilon;
  double sum_log = 0.0;
  for (std::size_t j = 0; j < m.cols; ++j) {
    sum_log += std::log(m(i, j));
  }
  // Prior normalizer of the Dirichlet(gamma (e_i + eps 1)) row plus the
  // Gamma(alpha, beta) kernel plus the row's likelihood kernel in gamma.
  return std::lgamma(gamma * (c * eps + 1.0)) -
         (c - 1.0) * std::lgamma(gamma * eps) -
         std::lgamma(gamma * (eps + 1.0)) +
         (hp.alpha_gamma - 1.0) * std::log(gamma) - hp.beta_gamma * gamma +
         gamma * (eps * sum_log + std::log(m(i, i)));
}

Vec update_gamma(const ChainState& state, const Hyperparams& hp,
                 const Vec& proposal_sd, RngStream& rng,
                 std::vector<int>* accepted) {
  const std::size_t c = state.gamma.size();
  Vec out(c);
  if (accepted) accepted->assign(c, 0);
  for (std::size_t i = 0; i < c; ++i) {
    const auto target = [&](double g) {
      return log_gamma_conditional(g, state.m, i, hp);
    };
    const MhResult r =
        mh_lognormal_step(state.gamma[i], target, proposal_sd[i], rng);
    out[i] = r.value;
    if (accepted) (*accepted)[i] = r.accepted ? 1 : 0;
  }
  return out;
}

ChainState initial_state(const PredictionCounts& v,
                         const TransferErrorMatrix& t, const ChainConfig& cfg) {
  const std::size_t c = v.size();
  ChainState state;
  state.gamma = cfg.fixed_gamma ? *cfg.fixed_gamma : Vec(c, 1.0);
  if (state.gamma.size() != c) {
    throw ShapeError("fixed gamma vector has wrong length");
  }
  state.p = naive_estimate(v).values;
  state.m = shrinkage_estimate(t, state.gamma).m;
  state.b = IMat(c, c, 0);
  return state;
}

namespace {

struct SingleChainOut {
  ChainDraws draws;
  Vec accept_rate;
};

void sweep(ChainState& state, const PredictionCounts& v,
           const TransferErrorMatrix& t, const Hyperparams& hp, const Vec& sd,
           bool sample_gamma, RngStream& rng, std::vector<int>* accepted) {
  state.b = update_b(state, v, rng);
  state.m = update_m(state, t, hp, rng);
  state.p = update_p(state, hp, rng);
  if (sample_gamma) {
    state.gamma = update_gamma(state, hp, sd, rng, accepted);
  }
}

void flatten(const ChainState& state, Vec& out) {
  out.clear();
  out.insert(out.end(), state.p.begin(), state.p.end());
  out.insert(out.end(), state.m.a.begin(), state.m.a.end());
  out.insert(out.end(), state.gamma.begin(), state.gamma.end());
}

SingleChainOut run_one_chain(const PredictionCounts& v,
                             const TransferErrorMatrix& t,
                             const Hyperparams& hp, const ChainConfig& cfg,
                             unsigned chain_id) {
  RngStream rng(cfg.seed, chain_id);
  ChainState state = initial_state(v, t, cfg);
  const std::size_t c = v.size();
  const bool sample_gamma = !cfg.fixed_gamma.has_value();
  Vec sd(c, cfg.mh_proposal_sd);
  std::vector<int> accepted;

  // Burn-in, optionally tuning each proposal sd toward 44% acceptance in
  // batches of 50 with a diminishing step, then frozen for the sampling run.
  constexpr long long kBatch = 50;
  std::vector<long long> batch_acc(c, 0);
  long long batch_index = 0;
  for (long long it = 0; it < cfg.n_burnin; ++it) {
    sweep(state, v, t, hp, sd, sample_gamma, rng, &accepted);
    if (cfg.adapt_mh && sample_gamma) {
      for (std::size_t i = 0; i < c; ++i) batch_acc[i] += accepted[i];
      if ((it + 1) % kBatch == 0) {
        ++batch_index;
        const double step =
            std::min(0.05, 1.0 / std::sqrt(static_cast<double>(batch_index)));
        for (std::size_t i = 0; i < c; ++i) {
          const double rate =
              static_cast<double>(batch_acc[i]) / static_cast<double>(kBatch);
          sd[i] *= std::exp(rate > 0.44 ? step : -step);
          batch_acc[i] = 0;
        }
      }
    }
  }

  SingleChainOut out;
  out.draws.draws.reserve(static_cast<std::size_t>(cfg.n_samples));
  std::vector<long long> acc_count(c, 0);
  long long gamma_sweeps = 0;
  const long long total = cfg.n_samples * cfg.thin;
  Vec flat;
  for (long long it = 0; it < total; ++it) {
    sweep(state, v, t, hp, sd, sample_gamma, rng, &accepted);
    if (sample_gamma) {
      ++gamma_sweeps;
      for (std::size_t i = 0; i < c; ++i) acc_count[i] += accepted[i];
    }
    if ((it + 1) % cfg.thin == 0) {
      flatten(state, flat);
      for (double x : flat) {
        if (!std::isfinite(x)) {
          throw InvalidStateError("chain " + std::to_string(chain_id) +
                                  " produced a non-finite draw at iteration " +
                                  std::to_string(it + 1));
        }
      }
      out.draws.draws.push_back(flat);
    }
  }
  out.accept_rate.assign(c, 0.0);
  if (gamma_sweeps > 0) {
    for (std::size_t i = 0; i < c; ++i) {
      out.accept_rate[i] = static_cast<double>(acc_count[i]) /
                           static_cast<double>(gamma_sweeps);
    }
  }
  return out;
}

}  // namespace

PosteriorSummary run_chain(const PredictionCounts& v,
                           const TransferErrorMatrix& t, const Hyperparams& hp,
                           const ChainConfig& cfg) {
  cfg.validate();
  hp.validate();
  const std::size_t c = v.size();
  if (t.size() != c) {
    throw ShapeError("run_chain: transfer matrix and counts disagree on C");
  }
  if (v.total < 1) {
    throw EmptyDataError("run_chain: no unlabeled predictions");
  }
  if (hp.delta == 0.0) {
    for (std::size_t i = 0; i < c; ++i) {
      if (v.v[i] == 0) {
        throw ParameterError(
            "run_chain: delta = 0 requires every predicted-class count to be "
            "positive (class " +
            std::to_string(i + 1) + " is empty)");
      }
    }
  }

  std::vector<SingleChainOut> results(cfg.n_chains);
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  std::vector<std::thread> workers;
  workers.reserve(cfg.n_chains);
  for (unsigned chain = 0; chain < cfg.n_chains; ++chain) {
    workers.emplace_back([&, chain]() {
      try {
        results[chain] = run_one_chain(v, t, hp, cfg, chain);
      } catch (...) {
        errors[chain] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  DrawSchema schema;
  schema.add_vector("p", c);
  schema.add_matrix("m", c, c);
  schema.add_vector("gamma", c);

  std::vector<ChainDraws> chains;
  chains.reserve(cfg.n_chains);
  for (auto& r : results) chains.push_back(std::move(r.draws));

  PosteriorSummary summary = summarize(std::move(schema), std::move(chains),
                                       cfg.keep_draws);
  summary.seed = cfg.seed;
  for (std::size_t i = 0; i < c; ++i) {
    summary.accept_names.push_back({"gamma", static_cast<int>(i), -1});
  }
  for (const auto& r : results) summary.accept_rate.push_back(r.accept_rate);
  return summary;
}

}  // namespace prevcal
