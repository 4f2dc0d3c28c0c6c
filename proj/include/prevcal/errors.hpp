#ifndef PREVCAL_ERRORS_HPP
#define PREVCAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace prevcal {

// Parameter outside its mathematical domain (non-positive shape, bad simplex, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Dimension mismatch between containers that must agree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A computation that needs data received none.
struct EmptyDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A sampler conditional became degenerate (zero normalizer, improper Dirichlet).
struct DegenerateStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Internal inconsistency: NaN log-density, broken ascent, non-finite draw.
struct InvalidStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given inputs (zero truth component, N <= 1).
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or missing user input (files, config); maps to exit status 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace prevcal

#endif
