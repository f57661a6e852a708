#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace squeezelab {

/// Default bound on probability mass allowed to fall outside a truncated
/// support. High-order factorial moments are very tail sensitive, so
/// constructors throw instead of silently renormalizing.
inline constexpr double kDefaultTailTol = 1e-9;

/// Photon-number distribution of a single mode, truncated to `probs.size()`.
struct MarginalDist {
  std::vector<double> probs;
  double truncated_mass = 0.0;
  // Set when the distribution is an empirical histogram.
  std::optional<std::uint64_t> n_events;

  std::size_t dim() const noexcept { return probs.size(); }
  double total() const;
};

/// Joint signal x idler photon-number distribution, row-major with the
/// signal photon number as the row index.
class JointDist {
 public:
  JointDist() = default;
  JointDist(std::size_t dim_s, std::size_t dim_i);

  /// Histogram built from integer counts; events outside the stored support
  /// are `n_events - sum(counts)` and become the truncated mass.
  static JointDist from_counts(std::size_t dim_s, std::size_t dim_i,
                               std::vector<std::uint64_t> counts,
                               std::uint64_t n_events);

  std::size_t dim_s() const noexcept { return dim_s_; }
  std::size_t dim_i() const noexcept { return dim_i_; }
  std::size_t size() const noexcept { return probs_.size(); }

  double operator()(std::size_t m, std::size_t n) const { return probs_[m * dim_i_ + n]; }
  double& operator()(std::size_t m, std::size_t n) { return probs_[m * dim_i_ + n]; }

  std::span<const double> probs() const noexcept { return probs_; }
  std::span<double> probs() noexcept { return probs_; }
  std::span<const double> row(std::size_t m) const {
    return std::span<const double>(probs_).subspan(m * dim_i_, dim_i_);
  }

  double truncated_mass() const noexcept { return truncated_mass_; }
  void set_truncated_mass(double mass) noexcept { truncated_mass_ = mass; }

  std::optional<std::uint64_t> n_events() const noexcept { return n_events_; }
  void set_n_events(std::optional<std::uint64_t> n) noexcept { n_events_ = n; }

  bool has_counts() const noexcept { return !counts_.empty(); }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }

  double total() const;
  /// Sets truncated_mass to 1 - total().
  void close_mass();
  /// Throws InvalidData unless entries are finite, non-negative and the mass
  /// balances to within `tol`.
  void validate(double tol = 1e-12) const;

  /// Copy restricted to the leading dim_s x dim_i block; dropped mass is
  /// added to the truncated mass.
  JointDist restricted(std::size_t dim_s, std::size_t dim_i) const;

 private:
  std::size_t dim_s_ = 0;
  std::size_t dim_i_ = 0;
  std::vector<double> probs_;
  double truncated_mass_ = 0.0;
  std::optional<std::uint64_t> n_events_;
  std::vector<std::uint64_t> counts_;
};

/// Schmidt coefficients of a multimode down-conversion source together with
/// the overall gain B (mode k is squeezed by r_k = B * lambda_k).
struct SchmidtSpectrum {
  std::vector<double> lambdas;
  double gain = 0.0;

  /// 1 / sum(lambda^4).
  double effective_k() const;
};

/// The eight parameters of the lossy PDC + coherent + thermal model.
/// Photon numbers are means before loss; n_pdc is per arm.
struct ModelParams {
  double eta_s = 1.0;
  double eta_i = 1.0;
  double n_pdc = 0.0;
  double k = 1.0;
  double n_alpha_s = 0.0;
  double n_alpha_i = 0.0;
  double n_th_s = 0.0;
  double n_th_i = 0.0;

  void validate() const;
};

enum class Background { Poisson, Thermal };

/// Single-mode two-mode squeezed vacuum: p(n, n) = (1 - lambda^2) lambda^(2n).
JointDist tmsv_joint(double lambda, std::size_t dim, double tail_tol = kDefaultTailTol);

/// Exponentially decaying Schmidt spectrum lambda_k^2 = (1 - q) q^(k-1),
/// q = (K - 1) / (K + 1). With n_modes == 0 enough modes are kept that the
/// renormalized spectrum reproduces K to better than 1e-9.
SchmidtSpectrum schmidt_spectrum(double k, std::size_t n_modes = 0);

/// Gain B with sum_k sinh^2(B lambda_k) == n_pdc.
double solve_gain(std::span<const double> lambdas, double n_pdc);

/// Photon-number distribution of one arm of the multimode source; the joint
/// distribution is this vector placed on the diagonal.
MarginalDist multimode_pdc_diagonal(double n_pdc, double k, std::size_t dim,
                                    double tail_tol = kDefaultTailTol);

JointDist multimode_pdc(double n_pdc, double k, std::size_t dim,
                        double tail_tol = kDefaultTailTol);

MarginalDist background_marginal(Background kind, double mu, std::size_t dim,
                                 double tail_tol = kDefaultTailTol);

/// Truncated discrete convolution of two independent photon-number
/// distributions; output length is min(a.dim(), b.dim()).
MarginalDist convolve(const MarginalDist& a, const MarginalDist& b);

/// Pre-loss joint distribution of PDC with independent coherent and thermal
/// backgrounds in each arm. Loss parameters in `params` are ignored.
JointDist compose_state(const ModelParams& params, std::size_t dim,
                        double tail_tol = kDefaultTailTol);

/// Smallest dimension for which compose_state(params, dim) leaves at most
/// `tail_tol` outside the support.
std::size_t choose_dim(const ModelParams& params, double tail_tol = kDefaultTailTol);

std::pair<MarginalDist, MarginalDist> marginals(const JointDist& j);

}  // namespace squeezelab
