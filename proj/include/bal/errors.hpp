#ifndef BAL_ERRORS_HPP
#define BAL_ERRORS_HPP

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bal {

/// The surrogate could not be factorized or fitted.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The calibrated response range collapsed (y_min == y_max).
class DegenerateGridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulator evaluation failed. Carries the offending input.
class SimulatorError : public std::runtime_error {
 public:
  SimulatorError(const std::string& what, std::vector<double> input = {})
      : std::runtime_error(what), input_(std::move(input)) {}
  const std::vector<double>& input() const noexcept { return input_; }

 private:
  std::vector<double> input_;
};

// Warning sink. Defaults to stderr; tests and the CLI may redirect it.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

inline void warn(const std::string& msg) {
  if (auto& s = warning_sink()) s(msg);
}

}  // namespace bal

#endif  // BAL_ERRORS_HPP
