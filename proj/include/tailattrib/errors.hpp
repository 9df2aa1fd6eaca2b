#pragma once

#include <stdexcept>
#include <string>

namespace tailattrib {

// Bad caller-supplied data (sizes, ranges, file contents).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation failed to converge or produced a non-finite result.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg, double best = 0.0)
      : std::runtime_error(msg), best_estimate(best) {}
  double best_estimate;
};

}  // namespace tailattrib
