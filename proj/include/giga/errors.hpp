#pragma once

#include <stdexcept>
#include <string>

namespace giga {

// A numerical guard tripped: near-singular surrogate covariance, loss of
// positive definiteness, or probability underflow. Harness code treats these
// as flaggable per-trial failures rather than hard errors.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The fixed-point iteration produced non-finite coordinates.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(int iteration, const std::string& what)
      : NumericalError(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace giga
