#pragma once

#include <cmath>
#include <span>

namespace squeezelab {

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// ln(k (k-1) ... (k-n+1)) as a direct sum of logs; -inf when k < n.
inline double log_falling_factorial(long k, int n) {
  if (k < n) return -INFINITY;
  double acc = 0.0;
  for (int l = 0; l < n; ++l) acc += std::log(static_cast<double>(k - l));
  return acc;
}

}  // namespace squeezelab
