#ifndef PREVCAL_DISTRIBUTIONS_HPP
#define PREVCAL_DISTRIBUTIONS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "prevcal/rng.hpp"

namespace prevcal {

// Random-variate kernel shared by all samplers. Everything is hand-rolled
// because the standard library's distributions are implementation-defined;
// here a fixed (seed, stream) pair pins the draw sequence exactly.

double draw_normal(RngStream& rng);
double draw_exponential(RngStream& rng);

// Marsaglia-Tsang squeeze; shapes below one are boosted via Gamma(shape+1)
// and a uniform power. Rate parameterization: mean = shape / rate.
double draw_gamma(double shape, double rate, RngStream& rng);

// log of a Gamma(shape, 1) draw, computed in log space so tiny shapes do not
// underflow to zero.
double draw_log_gamma(double shape, RngStream& rng);

// Dirichlet via normalized log-space gamma draws. Entries are strictly
// positive and sum to one to machine precision.
std::vector<double> draw_dirichlet(const std::vector<double>& alpha,
                                   RngStream& rng);

// Multinomial(n, probs) by CDF inversion per trial; probs must lie on the
// simplex within 1e-10.
std::vector<long long> draw_multinomial(long long n,
                                        const std::vector<double>& probs,
                                        RngStream& rng);

struct PolyaGammaParams {
  double b;  // shape, a positive integer in all uses here
  double c;  // tilt
};

// PG(b, c) for integer b as a sum of b exact PG(1, c) draws (Devroye-type
// alternating-series sampler, no truncation bias).
// E[PG(b, c)] = (b / (2c)) tanh(c / 2), with limit b / 4 at c = 0.
double draw_polya_gamma(const PolyaGammaParams& params, RngStream& rng);
double draw_polya_gamma_1(double c, RngStream& rng);

struct MhResult {
  double value;
  bool accepted;
};

// One Metropolis step with a log-normal random walk proposal on (0, inf).
// The acceptance ratio carries the Jacobian of the log transform so detailed
// balance holds with respect to log_target. proposal_sd == 0 keeps the
// current value.
MhResult mh_lognormal_step(double current,
                           const std::function<double(double)>& log_target,
                           double proposal_sd, RngStream& rng);

}  // namespace prevcal

#endif
