#include "timberlens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timberlens/common.hpp"

namespace timberlens {

double LinearFit::mean_se(double x) const {
  const double dx = x - x_mean;
  return residual_sd * std::sqrt(1.0 / double(n) + dx * dx / sxx);
}

std::optional<LinearFit> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("fit_line: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  LinearFit f;
  f.n = n;
  f.x_mean = mx;
  f.sxx = sxx;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.predict(x[i]);
    ssr += r * r;
  }
  f.residual_sd = std::sqrt(ssr / double(n - 2));
  f.slope_se = f.residual_sd / std::sqrt(sxx);
  f.intercept_se = f.residual_sd * std::sqrt(1.0 / double(n) + mx * mx / sxx);
  return f;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace timberlens
