#pragma once

#include <span>

namespace qpnls {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
  double rms_residual = 0.0;
};

// Ordinary least squares y = slope x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);
// Fit of log y against log x; all values must be positive.
LinearFit loglog_fit(std::span<const double> x, std::span<const double> y);

}  // namespace qpnls
