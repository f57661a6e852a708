#pragma once

#include <cstddef>
#include <vector>

#include "squeezelab/distributions.hpp"

namespace squeezelab {

/// Beam-splitter loss: L[k][n] = C(n, k) eta^k (1 - eta)^(n - k), zero for
/// k > n. Column-stochastic on the truncated support.
class LossMatrix {
 public:
  LossMatrix(double eta, std::size_t dim);

  double eta() const noexcept { return eta_; }
  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t k, std::size_t n) const { return entries_[k * dim_ + n]; }

 private:
  double eta_;
  std::size_t dim_;
  std::vector<double> entries_;
};

LossMatrix loss_matrix(double eta, std::size_t dim);

/// p_out(k, l) = sum_mn L_s(k, m) L_i(l, n) p_in(m, n). Dimensions and
/// truncated mass are kept; sample metadata is dropped.
JointDist apply_loss(const JointDist& j, double eta_s, double eta_i);
MarginalDist apply_loss(const MarginalDist& m, double eta);

struct InversionResult {
  JointDist state;
  /// Weighted sum of squares sum ((p_meas - p_fit) / sigma)^2 over the window.
  double residual = 0.0;
  int iterations = 0;
};

/// Non-negative, unit-mass p_in on dim_in x dim_in minimizing the
/// sigma-weighted squared residual of apply_loss(p_in) against the
/// measured histogram restricted to the same window.
InversionResult invert_loss(const JointDist& measured, double eta_s, double eta_i,
                            std::size_t dim_in);

/// Statistical error model of a histogram bin with N events:
/// sigma = 1/N + sqrt(p / N).
double bin_sigma(double p_meas, double n_events);

}  // namespace squeezelab
