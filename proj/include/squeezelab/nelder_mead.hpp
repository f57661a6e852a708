#pragma once

#include <functional>
#include <span>
#include <vector>

namespace squeezelab {

struct NelderMeadOptions {
  double initial_step = 0.5;
  /// Converged when every vertex lies within this distance of the best one.
  double diameter_tol = 1e-8;
  int max_evaluations = 20000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace squeezelab
