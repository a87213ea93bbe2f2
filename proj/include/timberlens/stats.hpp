#pragma once

#include <optional>
#include <span>
#include <vector>

namespace timberlens {

/// z-value of the two-sided 95 % normal interval.
inline constexpr double kZ95 = 1.959963984540054;

/// Ordinary least squares y = intercept + slope * x. Intervals use the
/// normal approximation.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double residual_sd = 0.0;
  std::size_t n = 0;
  double x_mean = 0.0;
  double sxx = 0.0;

  double predict(double x) const { return intercept + slope * x; }
  /// Standard error of the fitted mean at x.
  double mean_se(double x) const;
  double slope_ci_low() const { return slope - kZ95 * slope_se; }
  double slope_ci_high() const { return slope + kZ95 * slope_se; }
};

/// Absent with fewer than 3 points or no spread in x.
std::optional<LinearFit> fit_line(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
/// Midpoint convention for even sizes; v must be non-empty.
double median(std::vector<double> v);

}  // namespace timberlens
