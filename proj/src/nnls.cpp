#include "squeezelab/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace squeezelab {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                              const std::vector<Eigen::Index>& passive) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(passive.size()));
  for (std::size_t c = 0; c < passive.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(passive[c]);
  return sub.colPivHouseholderQr().solve(b);
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  const Eigen::Index n = a.cols();
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);

  NnlsResult result;
  result.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> in_passive(static_cast<std::size_t>(n), false);

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.norm() *
                     static_cast<double>(std::max(a.rows(), n));

  Eigen::VectorXd x = result.x;
  Eigen::VectorXd w = a.transpose() * (b - a * x);
  int it = 0;
  for (; it < max_iterations; ++it) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!in_passive[static_cast<std::size_t>(j)] && w[j] > best) {
        best = w[j];
        t = j;
      }
    }
    if (t < 0) {
      result.converged = true;
      break;
    }
    in_passive[static_cast<std::size_t>(t)] = true;

    bool first_pass = true;
    while (true) {
      std::vector<Eigen::Index> passive;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (in_passive[static_cast<std::size_t>(j)]) passive.push_back(j);
      }
      const Eigen::VectorXd z = solve_passive(a, b, passive);
      if (first_pass) {
        first_pass = false;
        // A candidate whose own coefficient comes out non-positive would be
        // dropped again at once; exclude it for this round instead.
        const auto pos = std::find(passive.begin(), passive.end(), t) - passive.begin();
        if (z[pos] <= 0.0) {
          in_passive[static_cast<std::size_t>(t)] = false;
          w[t] = 0.0;
          t = -1;
          break;
        }
      }
      if (z.minCoeff() > 0.0) {
        x.setZero();
        for (std::size_t c = 0; c < passive.size(); ++c) x[passive[c]] = z[static_cast<Eigen::Index>(c)];
        break;
      }
      // Step back toward the feasible region until a passive variable hits 0.
      double alpha = 1.0;
      Eigen::Index blocking = -1;
      for (std::size_t c = 0; c < passive.size(); ++c) {
        const double zc = z[static_cast<Eigen::Index>(c)];
        const double xc = x[passive[c]];
        if (zc <= 0.0) {
          const double ratio = xc / (xc - zc);
          if (blocking < 0 || ratio < alpha) {
            alpha = ratio;
            blocking = passive[c];
          }
        }
      }
      for (std::size_t c = 0; c < passive.size(); ++c) {
        const Eigen::Index j = passive[c];
        x[j] += alpha * (z[static_cast<Eigen::Index>(c)] - x[j]);
      }
      x[blocking] = 0.0;
      for (Eigen::Index j : passive) {
        if (x[j] <= 0.0) {
          x[j] = 0.0;
          in_passive[static_cast<std::size_t>(j)] = false;
        }
      }
      if (std::none_of(in_passive.begin(), in_passive.end(), [](bool p) { return p; })) break;
      ++it;
      if (it >= max_iterations) break;
    }
    if (t < 0) continue;
    w = a.transpose() * (b - a * x);
  }
  result.x = x;
  result.iterations = it;
  return result;
}

}  // namespace squeezelab
