#include "squeezelab/channels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "squeezelab/error.hpp"
#include "squeezelab/nnls.hpp"
#include "squeezelab/numerics.hpp"

namespace squeezelab {

namespace {

constexpr double kMinInvertibleEta = 0.3;
constexpr std::size_t kMaxInversionDim = 15;

void require_eta(double eta) {
  require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidParameter,
          "transmission must lie in [0, 1], got " + std::to_string(eta));
}

}  // namespace

LossMatrix::LossMatrix(double eta, std::size_t dim) : eta_(eta), dim_(dim), entries_(dim * dim, 0.0) {
  require_eta(eta);
  if (eta == 1.0 || eta == 0.0) {
    for (std::size_t n = 0; n < dim; ++n) entries_[(eta == 1.0 ? n : 0) * dim + n] = 1.0;
    return;
  }
  const double log_eta = std::log(eta);
  const double log_loss = std::log1p(-eta);
  for (std::size_t n = 0; n < dim; ++n) {
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double log_c = std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
      entries_[k * dim + n] = std::exp(log_c + kk * log_eta + (nn - kk) * log_loss);
    }
  }
}

LossMatrix loss_matrix(double eta, std::size_t dim) { return LossMatrix(eta, dim); }

JointDist apply_loss(const JointDist& j, double eta_s, double eta_i) {
  require_eta(eta_s);
  require_eta(eta_i);
  const std::size_t ds = j.dim_s();
  const std::size_t di = j.dim_i();
  const LossMatrix ls(eta_s, ds);
  const LossMatrix li(eta_i, di);

  // tmp(m, l) = sum_n p(m, n) L_i(l, n)
  std::vector<double> tmp(ds * di, 0.0);
  for (std::size_t m = 0; m < ds; ++m) {
    for (std::size_t l = 0; l < di; ++l) {
      CompensatedSum s;
      for (std::size_t n = l; n < di; ++n) s.add(j(m, n) * li(l, n));
      tmp[m * di + l] = s.value();
    }
  }
  JointDist out(ds, di);
  for (std::size_t k = 0; k < ds; ++k) {
    for (std::size_t l = 0; l < di; ++l) {
      CompensatedSum s;
      for (std::size_t m = k; m < ds; ++m) s.add(ls(k, m) * tmp[m * di + l]);
      out(k, l) = s.value();
    }
  }
  out.set_truncated_mass(j.truncated_mass());
  return out;
}

MarginalDist apply_loss(const MarginalDist& m, double eta) {
  require_eta(eta);
  const LossMatrix l(eta, m.dim());
  MarginalDist out;
  out.probs.assign(m.dim(), 0.0);
  for (std::size_t k = 0; k < m.dim(); ++k) {
    CompensatedSum s;
    for (std::size_t n = k; n < m.dim(); ++n) s.add(l(k, n) * m.probs[n]);
    out.probs[k] = s.value();
  }
  out.truncated_mass = m.truncated_mass;
  return out;
}

double bin_sigma(double p_meas, double n_events) {
  return 1.0 / n_events + std::sqrt(p_meas / n_events);
}

InversionResult invert_loss(const JointDist& measured, double eta_s, double eta_i,
                            std::size_t dim_in) {
  require_eta(eta_s);
  require_eta(eta_i);
  require(measured.n_events().has_value(), ErrorKind::InvalidData,
          "loss inversion needs the event count of the measured histogram");
  require(dim_in >= 1 && dim_in <= measured.dim_s() && dim_in <= measured.dim_i(),
          ErrorKind::InvalidParameter, "dim_in must be between 1 and the measured dimensions");
  require(eta_s > kMinInvertibleEta && eta_i > kMinInvertibleEta, ErrorKind::Conditioning,
          "loss inversion is ill-conditioned for transmissions <= 0.3");
  require(dim_in <= kMaxInversionDim, ErrorKind::Conditioning,
          "loss inversion is ill-conditioned above 15 photons per mode");

  const auto d = static_cast<Eigen::Index>(dim_in);
  const Eigen::Index cells = d * d;
  const double n_events = static_cast<double>(*measured.n_events());
  const LossMatrix ls(eta_s, dim_in);
  const LossMatrix li(eta_i, dim_in);

  // Rows: output bins (k, l) weighted by 1/sigma, plus one row pinning the
  // total mass. Columns: input cells (m, n), scaled to unit norm.
  Eigen::MatrixXd a(cells + 1, cells);
  Eigen::VectorXd b(cells + 1);
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index l = 0; l < d; ++l) {
      const Eigen::Index row = k * d + l;
      const double p = measured(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
      const double inv_sigma = 1.0 / bin_sigma(p, n_events);
      b[row] = p * inv_sigma;
      for (Eigen::Index m = 0; m < d; ++m) {
        for (Eigen::Index n = 0; n < d; ++n) {
          a(row, m * d + n) = ls(static_cast<std::size_t>(k), static_cast<std::size_t>(m)) *
                              li(static_cast<std::size_t>(l), static_cast<std::size_t>(n)) * inv_sigma;
        }
      }
    }
  }
  // Weighted like a typical data column; a heavier row would swamp the data
  // once columns are normalized. The result is renormalized below.
  const double pin = a.topRows(cells).colwise().norm().maxCoeff();
  a.row(cells).setConstant(pin);
  b[cells] = pin;

  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < cells; ++c) {
    if (scale[c] == 0.0) scale[c] = 1.0;
    a.col(c) /= scale[c];
  }

  const NnlsResult sol = nnls(a, b);
  Eigen::VectorXd x = sol.x.cwiseQuotient(scale);
  const double mass = x.sum();
  require(mass > 0.0, ErrorKind::InvalidData, "loss inversion produced an empty state");
  x /= mass;

  InversionResult result;
  result.state = JointDist(dim_in, dim_in);
  for (Eigen::Index c = 0; c < cells; ++c) result.state.probs()[static_cast<std::size_t>(c)] = x[c];
  result.state.set_truncated_mass(0.0);
  result.iterations = sol.iterations;

  const JointDist fitted = apply_loss(result.state, eta_s, eta_i);
  CompensatedSum ssq;
  for (std::size_t k = 0; k < dim_in; ++k) {
    for (std::size_t l = 0; l < dim_in; ++l) {
      const double p = measured(k, l);
      const double r = (p - fitted(k, l)) / bin_sigma(p, n_events);
      ssq.add(r * r);
    }
  }
  result.residual = ssq.value();
  return result;
}

}  // namespace squeezelab
