#include "prevcal/covariate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "prevcal/distributions.hpp"
#include "prevcal/errors.hpp"
#include "prevcal/estimators.hpp"
#include "prevcal/linalg.hpp"

namespace prevcal {

void DesignMatrix::validate() const {
  if (x.rows == 0 || x.cols == 0) {
    throw ShapeError("design matrix must have at least one row and one term");
  }
  for (double v : x.a) {
    if (!std::isfinite(v)) {
      throw ParameterError("design matrix entries must be finite");
    }
  }
  if (!term_names.empty() && term_names.size() != x.cols) {
    throw ShapeError("design matrix term names do not match the column count");
  }
}

StratifiedCounts StratifiedCounts::checked(IMat v) {
  if (v.rows == 0 || v.cols < 2) {
    throw ShapeError("stratified counts need >= 1 group and >= 2 classes");
  }
  StratifiedCounts out;
  out.group_sizes.assign(v.rows, 0);
  out.total = 0;
  for (std::size_t g = 0; g < v.rows; ++g) {
    for (std::size_t j = 0; j < v.cols; ++j) {
      if (v(g, j) < 0) {
        throw ParameterError("stratified counts must be >= 0");
      }
      out.group_sizes[g] += v(g, j);
    }
    out.total += out.group_sizes[g];
  }
  out.v = std::move(v);
  return out;
}

RegressionPrior RegressionPrior::default_for(std::size_t d, double variance) {
  RegressionPrior prior;
  prior.mean.assign(d, 0.0);
  prior.covariance = Mat(d, d, 0.0);
  for (std::size_t i = 0; i < d; ++i) prior.covariance(i, i) = variance;
  return prior;
}

Vec softmax_probs(const Mat& beta, const Vec& x_row) {
  if (beta.rows != x_row.size()) {
    throw ShapeError("softmax_probs: design row does not match beta");
  }
  const std::size_t c = beta.cols + 1;
  Vec eta(c, 0.0);  // reference class keeps linear predictor 0
  for (std::size_t i = 0; i + 1 < c; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < beta.rows; ++d) s += x_row[d] * beta(d, i);
    eta[i] = s;
  }
  const double m = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  Vec p(c);
  for (std::size_t i = 0; i < c; ++i) {
    p[i] = std::exp(eta[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<IMat> update_b_stratified(const CovariateState& state,
                                      const StratifiedCounts& counts,
                                      const DesignMatrix& design,
                                      RngStream& rng) {
  const std::size_t c = counts.classes();
  const std::size_t groups = counts.groups();
  std::vector<IMat> out(groups, IMat(c, c, 0));
  Vec x_row(design.terms());
  Vec probs(c);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t d = 0; d < design.terms(); ++d) x_row[d] = design.x(g, d);
    const Vec p_g = softmax_probs(state.beta, x_row);
    for (std::size_t j = 0; j < c; ++j) {
      if (counts.v(g, j) == 0) continue;
      double total = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        probs[i] = state.m(i, j) * p_g[i];
        total += probs[i];
      }
      if (!(total > 0.0)) {
        throw DegenerateStateError(
            "update_b_stratified: zero allocation mass in group " +
            std::to_string(g + 1));
      }
      for (double& v : probs) v /= total;
      const IVec col = draw_multinomial(counts.v(g, j), probs, rng);
      for (std::size_t i = 0; i < c; ++i) out[g](i, j) = col[i];
    }
  }
  return out;
}

Mat update_m_stratified(const CovariateState& state,
                        const TransferErrorMatrix& t, const Hyperparams& hp,
                        RngStream& rng) {
  const std::size_t c = t.size();
  Mat m(c, c);
  Vec alpha(c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double b_sum = 0.0;
      for (const IMat& b_g : state.b) {
        b_sum += static_cast<double>(b_g(i, j));
      }
      alpha[j] = b_sum + static_cast<double>(t.t(i, j)) +
                 state.gamma[i] * hp.epsilon + (i == j ? state.gamma[i] : 0.0);
    }
    const Vec row = draw_dirichlet(alpha, rng);
    for (std::size_t j = 0; j < c; ++j) m(i, j) = row[j];
  }
  return m;
}

void update_omega_beta(CovariateState& state, const StratifiedCounts& counts,
                       const DesignMatrix& design, const RegressionPrior& prior,
                       RngStream& rng) {
  const std::size_t c = counts.classes();
  const std::size_t groups = counts.groups();
  const std::size_t d = design.terms();

  const Mat w0_inv = spd_inverse(prior.covariance);
  Vec w0_inv_m0(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t s = 0; s < d; ++s) {
      w0_inv_m0[r] += w0_inv(r, s) * prior.mean[s];
    }
  }

  Vec eta(c, 0.0);
  for (std::size_t i = 0; i + 1 < c; ++i) {
    Mat precision = w0_inv;
    Vec rhs = w0_inv_m0;
    for (std::size_t g = 0; g < groups; ++g) {
      const long long n_g = counts.group_sizes[g];
      if (n_g == 0) {
        state.omega(g, i) = 0.0;  // PG(0, .) is a point mass at zero
        continue;
      }
      // Linear predictors under the current coefficients (reference = 0).
      for (std::size_t kk = 0; kk < c; ++kk) {
        if (kk + 1 == c) {
          eta[kk] = 0.0;
          continue;
        }
        double s = 0.0;
        for (std::size_t r = 0; r < d; ++r) {
          s += design.x(g, r) * state.beta(r, kk);
        }
        eta[kk] = s;
      }
      // c_gi = log sum_{k != i} exp(eta_k), stabilized.
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t kk = 0; kk < c; ++kk) {
        if (kk != i) m = std::max(m, eta[kk]);
      }
      double lse = 0.0;
      for (std::size_t kk = 0; kk < c; ++kk) {
        if (kk != i) lse += std::exp(eta[kk] - m);
      }
      const double c_gi = m + std::log(lse);
      const double psi = eta[i] - c_gi;
      const double omega =
          draw_polya_gamma({static_cast<double>(n_g), psi}, rng);
      state.omega(g, i) = omega;
      double kappa = -static_cast<double>(n_g) / 2.0;
      for (std::size_t j = 0; j < c; ++j) {
        kappa += static_cast<double>(state.b[g](i, j));
      }
      // With psi = x'beta - c, expanding kappa*psi - omega*psi^2/2 in x'beta
      // gives the linear coefficient kappa + omega*c.
      const double shift = kappa + omega * c_gi;
      for (std::size_t r = 0; r < d; ++r) {
        rhs[r] += design.x(g, r) * shift;
        for (std::size_t s = 0; s <= r; ++s) {
          precision(r, s) += omega * design.x(g, r) * design.x(g, s);
        }
      }
    }
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t s = r + 1; s < d; ++s) {
        precision(r, s) = precision(s, r);
      }
    }
    const Mat l = cholesky_lower(precision);
    const Vec mean = cholesky_solve(l, rhs);
    Vec z(d);
    for (double& v : z) v = draw_normal(rng);
    const Vec noise = backward_solve_t(l, z);
    for (std::size_t r = 0; r < d; ++r) {
      state.beta(r, i) = mean[r] + noise[r];
    }
  }
}

namespace {

struct CovChainOut {
  ChainDraws draws;
  Vec accept_rate;
};

CovChainOut run_one_covariate_chain(const StratifiedCounts& counts,
                                    const DesignMatrix& design,
                                    const TransferErrorMatrix& t,
                                    const Hyperparams& hp,
                                    const ChainConfig& cfg,
                                    const RegressionPrior& prior,
                                    unsigned chain_id) {
  RngStream rng(cfg.seed, chain_id);
  const std::size_t c = counts.classes();
  const std::size_t groups = counts.groups();
  const std::size_t d = design.terms();

  CovariateState state;
  state.beta = Mat(d, c - 1, 0.0);
  state.gamma = Vec(c, 1.0);
  state.m = shrinkage_estimate(t, state.gamma).m;
  state.b.assign(groups, IMat(c, c, 0));
  state.omega = Mat(groups, c - 1, 0.0);

  Vec sd(c, cfg.mh_proposal_sd);
  const bool sample_gamma = !cfg.fixed_gamma.has_value();
  if (cfg.fixed_gamma) {
    if (cfg.fixed_gamma->size() != c) {
      throw ShapeError("fixed gamma vector has wrong length");
    }
    state.gamma = *cfg.fixed_gamma;
  }
  std::vector<int> accepted;

  const Vec group_weight = [&] {
    Vec w(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
      w[g] = static_cast<double>(counts.group_sizes[g]) /
             static_cast<double>(counts.total);
    }
    return w;
  }();

  const auto one_sweep = [&]() {
    state.b = update_b_stratified(state, counts, design, rng);
    state.m = update_m_stratified(state, t, hp, rng);
    update_omega_beta(state, counts, design, prior, rng);
    if (sample_gamma) {
      ChainState view;
      view.m = state.m;
      view.gamma = state.gamma;
      state.gamma = update_gamma(view, hp, sd, rng, &accepted);
    }
  };

  constexpr long long kBatch = 50;
  std::vector<long long> batch_acc(c, 0);
  long long batch_index = 0;
  for (long long it = 0; it < cfg.n_burnin; ++it) {
    one_sweep();
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

  CovChainOut out;
  out.draws.draws.reserve(static_cast<std::size_t>(cfg.n_samples));
  std::vector<long long> acc_count(c, 0);
  long long gamma_sweeps = 0;
  const long long total_iters = cfg.n_samples * cfg.thin;
  Vec x_row(d);
  for (long long it = 0; it < total_iters; ++it) {
    one_sweep();
    if (sample_gamma) {
      ++gamma_sweeps;
      for (std::size_t i = 0; i < c; ++i) acc_count[i] += accepted[i];
    }
    if ((it + 1) % cfg.thin == 0) {
      Vec flat;
      Vec p_marginal(c, 0.0);
      flat.reserve(c + d * (c - 1) + c * c + c + groups * c);
      // Group probabilities first into a scratch block so the marginal can
      // be assembled per draw (exactly the group-weighted average).
      std::vector<Vec> p_groups(groups);
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t r = 0; r < d; ++r) x_row[r] = design.x(g, r);
        p_groups[g] = softmax_probs(state.beta, x_row);
        for (std::size_t i = 0; i < c; ++i) {
          p_marginal[i] += group_weight[g] * p_groups[g][i];
        }
      }
      flat.insert(flat.end(), p_marginal.begin(), p_marginal.end());
      flat.insert(flat.end(), state.beta.a.begin(), state.beta.a.end());
      flat.insert(flat.end(), state.m.a.begin(), state.m.a.end());
      flat.insert(flat.end(), state.gamma.begin(), state.gamma.end());
      for (std::size_t g = 0; g < groups; ++g) {
        flat.insert(flat.end(), p_groups[g].begin(), p_groups[g].end());
      }
      for (double x : flat) {
        if (!std::isfinite(x)) {
          throw InvalidStateError("covariate chain " +
                                  std::to_string(chain_id) +
                                  " produced a non-finite draw at iteration " +
                                  std::to_string(it + 1));
        }
      }
      out.draws.draws.push_back(std::move(flat));
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

PosteriorSummary run_covariate_chain(const StratifiedCounts& counts,
                                     const DesignMatrix& design,
                                     const TransferErrorMatrix& t,
                                     const Hyperparams& hp,
                                     const ChainConfig& cfg,
                                     const RegressionPrior& prior) {
  cfg.validate();
  hp.validate();
  design.validate();
  const std::size_t c = counts.classes();
  if (design.groups() != counts.groups()) {
    throw ShapeError("covariate model: design rows != count groups");
  }
  if (t.size() != c) {
    throw ShapeError("covariate model: transfer matrix class count mismatch");
  }
  if (counts.total < 1) {
    throw EmptyDataError("covariate model: no unlabeled predictions");
  }
  if (prior.mean.size() != design.terms() ||
      prior.covariance.rows != design.terms() ||
      prior.covariance.cols != design.terms()) {
    throw ShapeError("covariate model: prior dimensions mismatch the design");
  }
  cholesky_lower(prior.covariance);  // fail fast on a bad prior

  std::vector<CovChainOut> results(cfg.n_chains);
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  std::vector<std::thread> workers;
  for (unsigned chain = 0; chain < cfg.n_chains; ++chain) {
    workers.emplace_back([&, chain]() {
      try {
        results[chain] = run_one_covariate_chain(counts, design, t, hp, cfg,
                                                 prior, chain);
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
  schema.add_matrix("beta", design.terms(), c - 1);
  schema.add_matrix("m", c, c);
  schema.add_vector("gamma", c);
  schema.add_matrix("p_group", counts.groups(), c);

  std::vector<ChainDraws> chains;
  for (auto& r : results) chains.push_back(std::move(r.draws));
  PosteriorSummary summary =
      summarize(std::move(schema), std::move(chains), cfg.keep_draws);
  summary.seed = cfg.seed;
  for (std::size_t i = 0; i < c; ++i) {
    summary.accept_names.push_back({"gamma", static_cast<int>(i), -1});
  }
  for (const auto& r : results) summary.accept_rate.push_back(r.accept_rate);
  return summary;
}

PosteriorSummary run_covariate_chain(const StratifiedCounts& counts,
                                     const DesignMatrix& design,
                                     const TransferErrorMatrix& t,
                                     const Hyperparams& hp,
                                     const ChainConfig& cfg) {
  return run_covariate_chain(counts, design, t, hp, cfg,
                             RegressionPrior::default_for(design.terms()));
}

}  // namespace prevcal
