#ifndef REDMIX_ERRORS_HPP_
#define REDMIX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace redmix {

/// Invalid or inconsistent configuration (bad key, bad value, broken decay law).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced non-finite values or a factorization failed.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string &what, double time = -1.0)
      : std::runtime_error(time >= 0.0
                               ? what + " (t = " + std::to_string(time) + ")"
                               : what),
        time_(time) {}

  /// Simulation time at which the failure was detected, or -1.
  double time() const { return time_; }

 private:
  double time_;
};

/// An operation was called on an object in the wrong state.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

} // namespace redmix

#endif // REDMIX_ERRORS_HPP_
