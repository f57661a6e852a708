#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "squeezelab/distributions.hpp"

namespace squeezelab {

enum class Arm { Signal, Idler };

/// Validity guard for truncated supports. A moment is rejected when the last
/// 5% of the support contributes more than 1e-6 of its value. `Auto` enforces
/// the guard for model distributions and skips it for histograms, whose
/// support is the full record of observed events.
enum class TailCheck { Auto, Enforce, Skip };

inline constexpr double kTailRelTol = 1e-6;

/// Expectations are taken over the represented support, renormalized by its
/// mass, so the moment of order 0 is exactly 1.
double mean(const MarginalDist& m);

/// <a^dag^n a^n> = sum_k k (k-1) ... (k-n+1) p_k.
double factorial_moment(const MarginalDist& m, int order, TailCheck check = TailCheck::Auto);
/// <a^dag^m a^m b^dag^n b^n>.
double joint_factorial_moment(const JointDist& j, int m, int n, TailCheck check = TailCheck::Auto);

/// Normalized correlation g^(n) = <a^dag^n a^n> / <a^dag a>^n.
double g_n(const MarginalDist& m, int order, TailCheck check = TailCheck::Auto);
double g_mn(const JointDist& j, int m, int n, TailCheck check = TailCheck::Auto);

/// g^(m,n) for 1 <= m <= max_m, 1 <= n <= max_n, row-major in m. Matches
/// g_mn cell by cell.
std::vector<double> g_surface(const JointDist& j, int max_m, int max_n,
                              TailCheck check = TailCheck::Auto);

/// Var(n_s - n_i) / <n_s + n_i>.
double nrf(const JointDist& j);

/// <(-1)^n>.
double parity(const MarginalDist& m);

struct Herald {
  MarginalDist dist;
  double probability = 0.0;
};

/// Distribution of the arm opposite `herald_arm` conditioned on observing
/// `h` photons in `herald_arm`.
Herald herald(const JointDist& j, Arm herald_arm, std::size_t h);

/// K = 1 / (g2 - 1).
double effective_mode_number(const MarginalDist& m);

struct MomentMatrix {
  int order = 0;
  /// Exponents (p, q) of n_a^p n_b^q, by total degree then descending p.
  std::vector<std::pair<int, int>> basis;
  /// Row-major symmetric matrix of size basis.size().
  std::vector<double> entries;
  double min_eigenvalue = 0.0;

  std::size_t size() const noexcept { return basis.size(); }
  double operator()(std::size_t r, std::size_t c) const { return entries[r * basis.size() + c]; }
};

/// Matrix of normally ordered moments <:f_r^dag f_c:> over monomials of
/// n_a = a^dag a / 2 and n_b = b^dag b / 2 of total degree <= order. A
/// negative eigenvalue certifies nonclassicality.
MomentMatrix nonclassicality_matrix(const JointDist& j, int order,
                                    TailCheck check = TailCheck::Auto);

/// Eigenvalues of a symmetric n x n matrix (row-major) by cyclic Jacobi
/// rotations, ascending.
std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n);

struct Squeezing {
  double potential_db = 0.0;
  double measurable_db = 0.0;
};

Squeezing squeezing_db(double r, double eta);

/// A scalar- or vector-valued statistic of a joint distribution, selected by
/// name. Grammar:
///   mean:s|i  g2:s|i  gn:s|i:N  k:s|i  parity:s|i  nrf  gmn:M,N
///   gsurface:M,N  mineig:N  herald-g2:s|i:H  herald-parity:s|i:H
/// In the herald forms the arm names the heralding mode.
struct Statistic {
  std::string name;
  std::vector<std::string> labels;
  std::function<std::vector<double>(const JointDist&)> eval;
};

Statistic make_statistic(std::string_view spec);

}  // namespace squeezelab
