#pragma once

#include <stdexcept>
#include <string>

namespace modsindy {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A state vector became non-finite during integration. Carries the index of
// the failing step so divergence can be located in long trajectories.
struct NonFiniteState : Error {
  NonFiniteState(const std::string& what, long step) : Error(what), step_index(step) {}
  long step_index;
};

// Library evaluation overflowed (large states + high-order monomials).
struct NonFiniteLibrary : Error {
  using Error::Error;
};

// The scalar loss (or an intermediate of its graph) is non-finite.
struct NonFiniteLoss : Error {
  NonFiniteLoss(const std::string& what, long iteration = -1, long window = -1, int offset = 0)
      : Error(what), iteration(iteration), window(window), offset(offset) {}
  long iteration;  // Adam iteration where divergence was detected, -1 if n/a
  long window;     // window index j of the failing flow map, -1 if n/a
  int offset;      // flow-map offset i of the failing flow map, 0 if n/a
};

// A coefficient column thresholded to all-zero while its derivative signal is
// non-negligible (threshold too large for the data).
struct EmptyModel : Error {
  EmptyModel(const std::string& what, int column) : Error(what), column(column) {}
  int column;
};

// Signal column has zero variance; noise calibration is undefined.
struct DegenerateSignal : Error {
  using Error::Error;
};

// Sample vector cannot support a distribution fit (e.g. constant).
struct DegenerateSamples : Error {
  using Error::Error;
};

// Trajectory has zero field energy; relative errors are undefined.
struct DegenerateTrajectory : Error {
  using Error::Error;
};

// Experiment configuration failed validation. Carries the JSON field path.
struct ConfigError : Error {
  ConfigError(const std::string& what, std::string field) : Error(what), field(std::move(field)) {}
  std::string field;
};

}  // namespace modsindy
