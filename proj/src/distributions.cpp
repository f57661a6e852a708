#include "squeezelab/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "squeezelab/error.hpp"
#include "squeezelab/numerics.hpp"

namespace squeezelab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::TruncationOverflow: return "truncation-overflow";
    case ErrorKind::TruncationUnreliable: return "truncation-unreliable";
    case ErrorKind::ZeroMean: return "zero-mean";
    case ErrorKind::EmptyHerald: return "empty-herald";
    case ErrorKind::UndefinedK: return "undefined-k";
    case ErrorKind::Conditioning: return "conditioning";
    case ErrorKind::DimMismatch: return "dim-mismatch";
    case ErrorKind::InvalidData: return "invalid-data";
    case ErrorKind::UnreliableMC: return "unreliable-mc";
    case ErrorKind::CalibrationFailure: return "calibration-failure";
    case ErrorKind::OutOfRange: return "out-of-range";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {

std::string overflow_message(double tail, double tol) {
  std::ostringstream os;
  os << "truncated mass " << tail << " exceeds tail tolerance " << tol
     << "; increase dim";
  return os.str();
}

void check_tail(double tail, double tol) {
  if (tail > tol) throw TruncationOverflow(tail, tol);
}

void require_dim(std::size_t dim) {
  require(dim >= 1, ErrorKind::InvalidParameter, "dim must be at least 1");
}

// Geometric distribution (1 - x) x^n, the photon statistics of one arm of a
// single-mode TMSV with x = lambda^2. Entries below 1e-20 of the first are
// dropped; they are far beneath double resolution of any sum they enter.
std::vector<double> geometric_support(double x, std::size_t dim) {
  std::vector<double> out;
  out.reserve(std::min<std::size_t>(dim, 64));
  double term = 1.0 - x;
  for (std::size_t n = 0; n < dim; ++n) {
    if (n > 0 && term < 1e-20 * (1.0 - x)) break;
    out.push_back(term);
    term *= x;
  }
  return out;
}

MarginalDist poisson_unchecked(double mu, std::size_t dim) {
  MarginalDist m;
  m.probs.resize(dim);
  if (mu == 0.0) {
    m.probs[0] = 1.0;
  } else {
    const double log_mu = std::log(mu);
    for (std::size_t n = 0; n < dim; ++n) {
      const double nn = static_cast<double>(n);
      m.probs[n] = std::exp(-mu + nn * log_mu - std::lgamma(nn + 1.0));
    }
  }
  m.truncated_mass = std::max(0.0, 1.0 - compensated_sum(m.probs));
  return m;
}

MarginalDist thermal_unchecked(double mu, std::size_t dim) {
  MarginalDist m;
  m.probs.resize(dim);
  if (mu == 0.0) {
    m.probs[0] = 1.0;
    return m;
  }
  const double log_ratio = std::log(mu) - std::log1p(mu);
  const double log_norm = -std::log1p(mu);
  for (std::size_t n = 0; n < dim; ++n) {
    m.probs[n] = std::exp(static_cast<double>(n) * log_ratio + log_norm);
  }
  m.truncated_mass = std::exp(static_cast<double>(dim) * log_ratio);
  return m;
}

MarginalDist background_pair(double n_alpha, double n_th, std::size_t dim) {
  return convolve(poisson_unchecked(n_alpha, dim), thermal_unchecked(n_th, dim));
}

}  // namespace

TruncationOverflow::TruncationOverflow(double tail_mass, double tolerance)
    : Error(ErrorKind::TruncationOverflow, overflow_message(tail_mass, tolerance)),
      tail_mass_(tail_mass),
      tolerance_(tolerance) {}

double MarginalDist::total() const { return compensated_sum(probs); }

JointDist::JointDist(std::size_t dim_s, std::size_t dim_i)
    : dim_s_(dim_s), dim_i_(dim_i), probs_(dim_s * dim_i, 0.0) {}

JointDist JointDist::from_counts(std::size_t dim_s, std::size_t dim_i,
                                 std::vector<std::uint64_t> counts,
                                 std::uint64_t n_events) {
  require(counts.size() == dim_s * dim_i, ErrorKind::DimMismatch,
          "counts length does not match dim_s * dim_i");
  require(n_events > 0, ErrorKind::InvalidData, "n_events must be positive");
  const std::uint64_t in_range = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  require(in_range <= n_events, ErrorKind::InvalidData, "counts exceed n_events");

  JointDist j(dim_s, dim_i);
  const double inv_n = 1.0 / static_cast<double>(n_events);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    j.probs_[b] = static_cast<double>(counts[b]) * inv_n;
  }
  j.truncated_mass_ = static_cast<double>(n_events - in_range) * inv_n;
  j.n_events_ = n_events;
  j.counts_ = std::move(counts);
  return j;
}

double JointDist::total() const { return compensated_sum(probs_); }

void JointDist::close_mass() { truncated_mass_ = std::max(0.0, 1.0 - total()); }

void JointDist::validate(double tol) const {
  for (double p : probs_) {
    require(std::isfinite(p) && p >= 0.0, ErrorKind::InvalidData,
            "joint distribution has a negative or non-finite entry");
  }
  require(truncated_mass_ >= 0.0, ErrorKind::InvalidData, "negative truncated mass");
  require(std::abs(total() + truncated_mass_ - 1.0) <= tol, ErrorKind::InvalidData,
          "joint distribution mass does not balance to 1");
}

JointDist JointDist::restricted(std::size_t dim_s, std::size_t dim_i) const {
  require(dim_s <= dim_s_ && dim_i <= dim_i_, ErrorKind::InvalidParameter,
          "restriction must not enlarge the support");
  JointDist out(dim_s, dim_i);
  CompensatedSum dropped;
  for (std::size_t m = 0; m < dim_s_; ++m) {
    for (std::size_t n = 0; n < dim_i_; ++n) {
      if (m < dim_s && n < dim_i) {
        out(m, n) = (*this)(m, n);
      } else {
        dropped += (*this)(m, n);
      }
    }
  }
  out.truncated_mass_ = truncated_mass_ + dropped.value();
  out.n_events_ = n_events_;
  if (has_counts()) {
    out.counts_.resize(dim_s * dim_i);
    for (std::size_t m = 0; m < dim_s; ++m) {
      for (std::size_t n = 0; n < dim_i; ++n) out.counts_[m * dim_i + n] = counts_[m * dim_i_ + n];
    }
  }
  return out;
}

double SchmidtSpectrum::effective_k() const {
  CompensatedSum s;
  for (double l : lambdas) s.add(l * l * l * l);
  return 1.0 / s.value();
}

void ModelParams::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  require(in_unit(eta_s) && in_unit(eta_i), ErrorKind::InvalidParameter,
          "efficiencies must lie in [0, 1]");
  require(n_pdc >= 0.0 && std::isfinite(n_pdc), ErrorKind::InvalidParameter,
          "n_pdc must be finite and >= 0");
  require(k >= 1.0 && std::isfinite(k), ErrorKind::InvalidParameter, "K must be >= 1");
  for (double n : {n_alpha_s, n_alpha_i, n_th_s, n_th_i}) {
    require(n >= 0.0 && std::isfinite(n), ErrorKind::InvalidParameter,
            "background photon numbers must be finite and >= 0");
  }
}

JointDist tmsv_joint(double lambda, std::size_t dim, double tail_tol) {
  require(lambda >= 0.0 && lambda < 1.0, ErrorKind::InvalidParameter,
          "TMSV requires 0 <= lambda < 1");
  require_dim(dim);
  const double x = lambda * lambda;
  JointDist j(dim, dim);
  double term = 1.0 - x;
  for (std::size_t n = 0; n < dim; ++n) {
    j(n, n) = term;
    term *= x;
  }
  const double tail = std::pow(x, static_cast<double>(dim));
  check_tail(tail, tail_tol);
  j.set_truncated_mass(tail);
  return j;
}

SchmidtSpectrum schmidt_spectrum(double k, std::size_t n_modes) {
  require(k >= 1.0 && std::isfinite(k), ErrorKind::InvalidParameter, "K must be >= 1");
  const double q = (k - 1.0) / (k + 1.0);
  std::vector<double> weights;  // lambda_k^2
  if (n_modes == 0) {
    // Renormalizing after dropping mass q^n shifts K by about 2 K q^n.
    const double dropped_target = 1e-11 / k;
    double w = 1.0 - q;
    double remaining = 1.0;
    while (true) {
      weights.push_back(w);
      remaining *= q;  // == q^(number of modes kept)
      if (remaining <= dropped_target || q == 0.0) break;
      w *= q;
    }
  } else {
    double w = 1.0 - q;
    for (std::size_t i = 0; i < n_modes; ++i) {
      weights.push_back(w);
      w *= q;
    }
  }
  const double norm = compensated_sum(weights);
  SchmidtSpectrum spec;
  spec.lambdas.reserve(weights.size());
  for (double w : weights) spec.lambdas.push_back(std::sqrt(w / norm));
  return spec;
}

double solve_gain(std::span<const double> lambdas, double n_pdc) {
  require(n_pdc >= 0.0 && std::isfinite(n_pdc), ErrorKind::InvalidParameter,
          "n_pdc must be finite and >= 0");
  if (n_pdc == 0.0) return 0.0;
  auto mean = [&](double b) {
    CompensatedSum s;
    for (double l : lambdas) {
      const double sh = std::sinh(b * l);
      s.add(sh * sh);
    }
    return s.value();
  };
  double lo = 0.0;
  double hi = std::asinh(std::sqrt(n_pdc)) + 1.0;
  while (mean(hi) < n_pdc) {
    lo = hi;
    hi *= 2.0;
  }
  // Bisect to full double resolution of B.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mean(mid) < n_pdc) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

MarginalDist multimode_pdc_diagonal(double n_pdc, double k, std::size_t dim, double tail_tol) {
  require_dim(dim);
  SchmidtSpectrum spec = schmidt_spectrum(k);
  const double gain = solve_gain(spec.lambdas, n_pdc);

  std::vector<double> acc{1.0};
  for (double l : spec.lambdas) {
    const double t = std::tanh(gain * l);
    const std::vector<double> mode = geometric_support(t * t, dim);
    if (mode.size() == 1 && mode[0] == 1.0) continue;
    std::vector<double> next(std::min(dim, acc.size() + mode.size() - 1), 0.0);
    for (std::size_t a = 0; a < acc.size(); ++a) {
      const std::size_t jmax = std::min(mode.size(), next.size() - a);
      for (std::size_t b = 0; b < jmax; ++b) next[a + b] += acc[a] * mode[b];
    }
    acc = std::move(next);
  }
  acc.resize(dim, 0.0);

  MarginalDist out;
  out.probs = std::move(acc);
  out.truncated_mass = std::max(0.0, 1.0 - out.total());
  check_tail(out.truncated_mass, tail_tol);
  return out;
}

JointDist multimode_pdc(double n_pdc, double k, std::size_t dim, double tail_tol) {
  const MarginalDist diag = multimode_pdc_diagonal(n_pdc, k, dim, tail_tol);
  JointDist j(dim, dim);
  for (std::size_t n = 0; n < dim; ++n) j(n, n) = diag.probs[n];
  j.set_truncated_mass(diag.truncated_mass);
  return j;
}

MarginalDist background_marginal(Background kind, double mu, std::size_t dim, double tail_tol) {
  require(mu >= 0.0 && std::isfinite(mu), ErrorKind::InvalidParameter,
          "background mean must be finite and >= 0");
  require_dim(dim);
  MarginalDist m = kind == Background::Poisson ? poisson_unchecked(mu, dim)
                                               : thermal_unchecked(mu, dim);
  check_tail(m.truncated_mass, tail_tol);
  return m;
}

MarginalDist convolve(const MarginalDist& a, const MarginalDist& b) {
  const std::size_t dim = std::min(a.dim(), b.dim());
  MarginalDist out;
  out.probs.assign(dim, 0.0);
  for (std::size_t n = 0; n < dim; ++n) {
    CompensatedSum s;
    for (std::size_t k = 0; k <= n; ++k) s.add(a.probs[k] * b.probs[n - k]);
    out.probs[n] = s.value();
  }
  out.truncated_mass = std::max(0.0, 1.0 - out.total());
  return out;
}

JointDist compose_state(const ModelParams& params, std::size_t dim, double tail_tol) {
  params.validate();
  require_dim(dim);
  const MarginalDist pdc = multimode_pdc_diagonal(params.n_pdc, params.k, dim, 1.0);
  const MarginalDist bs = background_pair(params.n_alpha_s, params.n_th_s, dim);
  const MarginalDist bi = background_pair(params.n_alpha_i, params.n_th_i, dim);

  JointDist j(dim, dim);
  for (std::size_t m = 0; m < dim; ++m) {
    for (std::size_t n = 0; n < dim; ++n) {
      CompensatedSum s;
      const std::size_t kmax = std::min(m, n);
      for (std::size_t k = 0; k <= kmax; ++k) s.add(pdc.probs[k] * bs.probs[m - k] * bi.probs[n - k]);
      j(m, n) = s.value();
    }
  }
  j.close_mass();
  check_tail(j.truncated_mass(), tail_tol);
  return j;
}

std::size_t choose_dim(const ModelParams& params, double tail_tol) {
  params.validate();
  require(tail_tol > 0.0, ErrorKind::InvalidParameter, "tail tolerance must be positive");
  // P(outside) <= tail_s + tail_i; the arm marginals are 1-D and cheap.
  auto tails = [&](std::size_t dim) {
    const MarginalDist pdc = multimode_pdc_diagonal(params.n_pdc, params.k, dim, 1.0);
    const MarginalDist s = convolve(pdc, background_pair(params.n_alpha_s, params.n_th_s, dim));
    const MarginalDist i = convolve(pdc, background_pair(params.n_alpha_i, params.n_th_i, dim));
    return s.truncated_mass + i.truncated_mass;
  };
  std::size_t hi = 8;
  while (tails(hi) > tail_tol) {
    require(hi < (1u << 16), ErrorKind::InvalidParameter, "no tractable dim meets the tail tolerance");
    hi *= 2;
  }
  std::size_t lo = hi / 2;
  if (hi == 8) lo = 0;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (tails(mid) > tail_tol) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::max<std::size_t>(hi, 1);
}

std::pair<MarginalDist, MarginalDist> marginals(const JointDist& j) {
  MarginalDist s, i;
  s.probs.assign(j.dim_s(), 0.0);
  i.probs.assign(j.dim_i(), 0.0);
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    CompensatedSum row;
    for (std::size_t n = 0; n < j.dim_i(); ++n) row.add(j(m, n));
    s.probs[m] = row.value();
  }
  for (std::size_t n = 0; n < j.dim_i(); ++n) {
    CompensatedSum col;
    for (std::size_t m = 0; m < j.dim_s(); ++m) col.add(j(m, n));
    i.probs[n] = col.value();
  }
  s.truncated_mass = j.truncated_mass();
  i.truncated_mass = j.truncated_mass();
  s.n_events = j.n_events();
  i.n_events = j.n_events();
  return {std::move(s), std::move(i)};
}

}  // namespace squeezelab
