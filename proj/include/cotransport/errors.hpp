#pragma once

#include <stdexcept>
#include <string>

namespace cotransport {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad scenario / payload / grid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Degenerate geometry, e.g. a thrust line that no contact set can oppose.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Rail rearrangement that cannot be executed without robots passing.
class PlanningError : public Error {
 public:
  using Error::Error;
};

// Non-finite state during flight integration.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cotransport
