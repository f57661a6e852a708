#include "squeezelab/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace squeezelab {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> x0, const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  NelderMeadResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isnan(v) ? INFINITY : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> v2;
    for (std::size_t i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };
  auto along = [&](double t, std::vector<double>& out) {
    for (std::size_t d = 0; d < n; ++d) out[d] = centroid[d] + t * (simplex[n][d] - centroid[d]);
  };

  while (true) {
    sort_simplex();
    double diameter = 0.0;
    for (std::size_t i = 1; i <= n; ++i) diameter = std::max(diameter, distance(simplex[0], simplex[i]));
    if (diameter < options.diameter_tol) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;
    ++result.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    }
    along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < values[0]) {
      along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[n] = trial2;
        values[n] = fe;
      } else {
        simplex[n] = trial;
        values[n] = fr;
      }
      continue;
    }
    if (fr < values[n - 1]) {
      simplex[n] = trial;
      values[n] = fr;
      continue;
    }
    // Contraction: outside if the reflection improved on the worst vertex.
    const bool outside = fr < values[n];
    along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : values[n])) {
      simplex[n] = trial2;
      values[n] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t d = 0; d < n; ++d) simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
      values[i] = eval(simplex[i]);
    }
  }
  result.x = simplex[0];
  result.value = values[0];
  return result;
}

}  // namespace squeezelab
