#include "prevcal/map_em.hpp"

#include <cmath>

#include "doctest.h"
#include "prevcal/errors.hpp"
#include "prevcal/gibbs_single.hpp"
#include "prevcal/simulate.hpp"

using namespace prevcal;

namespace {

double l1(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

TransferErrorMatrix diag_transfer(std::size_t c, long long n) {
  IMat t(c, c, 0);
  for (std::size_t i = 0; i < c; ++i) t(i, i) = n;
  return TransferErrorMatrix::checked(t);
}

}  // namespace

TEST_CASE("golden section finds a bracketed maximizer") {
  // Unimodal in log space with the maximum at 3.
  const auto f = [](double u) {
    const double d = u - std::log(3.0);
    return -d * d;
  };
  const double u_star =
      golden_section_max(f, std::log(1e-4), std::log(1e4), 1e-8);
  CHECK(std::abs(std::exp(u_star) - 3.0) < 1e-6);
}

TEST_CASE("e_step expectations") {
  EmState state;
  SUBCASE("identity rates allocate deterministically") {
    state.p = {0.25, 0.25, 0.25, 0.25};
    state.m = Mat::identity(4);
    const auto v = PredictionCounts::checked({3, 0, 9, 1});
    const Mat bhat = e_step(state, v);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(bhat(i, j) == (i == j ? static_cast<double>(v.v[j]) : 0.0));
      }
    }
  }
  SUBCASE("uniform rates split every column evenly") {
    state.p = {0.25, 0.25, 0.25, 0.25};
    state.m = Mat(4, 4, 0.25);
    const auto v = PredictionCounts::checked({8, 4, 0, 12});
    const Mat bhat = e_step(state, v);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        CHECK(bhat(i, j) ==
              doctest::Approx(static_cast<double>(v.v[j]) / 4.0));
      }
    }
  }
  SUBCASE("two-large-errors column matches the hand normalization") {
    state.p = {0.25, 0.25, 0.25, 0.25};
    state.m = canonical_matrix("M2");
    const auto v = PredictionCounts::checked({100, 0, 0, 0});
    const Mat bhat = e_step(state, v);
    CHECK(bhat(0, 0) == doctest::Approx(100.0 * 0.25 / 0.4125));
    CHECK(bhat(1, 0) == doctest::Approx(100.0 * 0.1625 / 0.4125));
    CHECK(bhat(2, 0) == 0.0);
    CHECK(bhat(3, 0) == 0.0);
  }
  SUBCASE("dead column is degenerate") {
    state.p = {1.0, 0.0};
    Mat m(2, 2, 0.0);
    m(0, 0) = 1.0;
    m(1, 0) = 1.0;
    state.m = m;
    CHECK_THROWS_AS(e_step(state, PredictionCounts::checked({0, 4})),
                    DegenerateStateError);
  }
}

TEST_CASE("m_step fixed point at the perfect-transfer fixture") {
  // Diagonal T with identity rates: p lands on v/N and stays there.
  const auto v = PredictionCounts::checked({100, 200, 300, 400});
  const auto t = diag_transfer(4, 10);
  Hyperparams hp;  // delta = 1
  EmConfig cfg;
  const EmResult r = run_em(v, t, hp, cfg);
  CHECK(r.converged);
  CHECK(l1(r.state.p, {0.1, 0.2, 0.3, 0.4}) < 0.01);
  for (int i = 0; i < 4; ++i) {
    CHECK(r.state.m(i, i) > 0.9);
  }
}

TEST_CASE("m_step with zero expected counts and flat prior is uniform") {
  EmState state;
  state.p = {0.25, 0.25, 0.25, 0.25};
  state.m = Mat::identity(4);
  state.gamma = {1.0, 1.0, 1.0, 1.0};
  state.bhat = Mat(4, 4, 0.0);
  Hyperparams hp;  // delta = 1
  EmConfig cfg;
  bool floored = false;
  m_step(state, TransferErrorMatrix::zeros(4), hp, cfg, &floored);
  for (int i = 0; i < 4; ++i) {
    CHECK(state.p[i] == doctest::Approx(0.25));
  }
}

TEST_CASE("max_iter zero returns the initialization unchanged") {
  const auto v = PredictionCounts::checked({10, 30, 40, 20});
  const auto t = diag_transfer(4, 5);
  Hyperparams hp;
  EmConfig cfg;
  cfg.max_iter = 0;
  const EmResult r = run_em(v, t, hp, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 0);
  CHECK(l1(r.state.p, {0.1, 0.3, 0.4, 0.2}) < 1e-9);
}

TEST_CASE("objective ascends monotonically along the trajectory" *
          doctest::timeout(240)) {
  // run_em aborts internally if the objective ever drops beyond the 1e-10
  // slack; additionally check the partial-run objectives are ordered.
  ScenarioSpec spec;
  spec.m = {canonical_matrix("M2")};
  spec.p_u = Vec{0.35, 0.3, 0.2, 0.15};
  spec.p_l = Vec{0.2, 0.4, 0.25, 0.15};
  spec.n_unlabeled = 3000;
  spec.n_labeled = 300;
  spec.seed = 2024;
  const SyntheticDataset ds = build_dataset(spec);
  Hyperparams hp;
  EmConfig cfg;

  double prev = -std::numeric_limits<double>::infinity();
  for (long long iters : {1, 2, 3, 5, 10, 50, 200}) {
    EmConfig partial = cfg;
    partial.max_iter = iters;
    const EmResult r = run_em(ds.unlabeled_counts(0), ds.transfer(0), hp,
                              partial);
    CHECK(r.objective >= prev - 1e-10 * (1.0 + std::abs(prev)));
    prev = r.objective;
  }

  const EmResult full = run_em(ds.unlabeled_counts(0), ds.transfer(0), hp, cfg);
  CHECK(full.converged);
  CHECK(full.objective >= prev - 1e-10 * (1.0 + std::abs(prev)));
}

TEST_CASE("posterior mode tracks the Gibbs mean on a peaked posterior" *
          doctest::timeout(300)) {
  ScenarioSpec spec;
  spec.m = {canonical_matrix("M2")};
  spec.p_u = Vec{0.3, 0.25, 0.25, 0.2};
  spec.p_l = Vec{0.25, 0.25, 0.25, 0.25};
  spec.n_unlabeled = 2000;
  spec.n_labeled = 300;
  spec.seed = 5151;
  const SyntheticDataset ds = build_dataset(spec);
  Hyperparams hp;  // delta = 1

  const EmResult em = run_em(ds.unlabeled_counts(0), ds.transfer(0), hp, {});
  ChainConfig cfg;
  cfg.n_burnin = 1500;
  cfg.n_samples = 2500;
  cfg.n_chains = 2;
  cfg.seed = 99;
  const PosteriorSummary gibbs =
      run_chain(ds.unlabeled_counts(0), ds.transfer(0), hp, cfg);
  CHECK(l1(em.state.p, gibbs.block_mean("p")) < 0.03);
}
