#include "squeezelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "squeezelab/channels.hpp"
#include "squeezelab/error.hpp"
#include "squeezelab/numerics.hpp"

namespace squeezelab {

namespace {

// Mass below this is dropped when trimming the support of a factor before
// convolving with it.
constexpr double kTrimMass = 1e-18;

// Number of leading entries carrying all but kTrimMass of a non-negative vector.
std::size_t trimmed_length(std::span<const double> v) {
  double tail = 0.0;
  std::size_t n = v.size();
  while (n > 1 && tail + v[n - 1] < kTrimMass) {
    tail += v[n - 1];
    --n;
  }
  return n;
}

struct Block {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;
};

Block trimmed_block(const JointDist& j) {
  std::vector<double> rows(j.dim_s(), 0.0), cols(j.dim_i(), 0.0);
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      rows[m] += j(m, n);
      cols[n] += j(m, n);
    }
  }
  Block b;
  b.rows = trimmed_length(rows);
  b.cols = trimmed_length(cols);
  b.v.resize(b.rows * b.cols);
  for (std::size_t m = 0; m < b.rows; ++m) {
    for (std::size_t n = 0; n < b.cols; ++n) b.v[m * b.cols + n] = j(m, n);
  }
  return b;
}

void convolve_into(JointDist& acc, const Block& f) {
  JointDist out(acc.dim_s(), acc.dim_i());
  for (std::size_t k = 0; k < acc.dim_s(); ++k) {
    for (std::size_t l = 0; l < acc.dim_i(); ++l) {
      double s = 0.0;
      const std::size_t amax = std::min(f.rows, k + 1);
      const std::size_t bmax = std::min(f.cols, l + 1);
      for (std::size_t a = 0; a < amax; ++a) {
        const double* frow = &f.v[a * f.cols];
        for (std::size_t b = 0; b < bmax; ++b) s += frow[b] * acc(k - a, l - b);
      }
      out(k, l) = s;
    }
  }
  acc = std::move(out);
}

std::vector<double> lossy_background(double n_alpha, double n_th, double eta, std::size_t dim) {
  const MarginalDist b = convolve(background_marginal(Background::Poisson, eta * n_alpha, dim, 1.0),
                                  background_marginal(Background::Thermal, eta * n_th, dim, 1.0));
  std::vector<double> v = b.probs;
  v.resize(trimmed_length(v));
  return v;
}

}  // namespace

JointDist lossy_tmsv(double x, double eta_s, double eta_i, std::size_t dim_s, std::size_t dim_i) {
  require(x >= 0.0 && x < 1.0, ErrorKind::InvalidParameter, "lambda^2 must lie in [0, 1)");
  require(eta_s >= 0.0 && eta_s <= 1.0 && eta_i >= 0.0 && eta_i <= 1.0, ErrorKind::InvalidParameter,
          "transmissions must lie in [0, 1]");
  const double a = 1.0 - eta_s, b = eta_s, c = 1.0 - eta_i, d = eta_i;
  const double denom = 1.0 - x * a * c;
  const double cu = x * b * c / denom;
  const double cv = x * a * d / denom;
  const double cuv = x * b * d / denom;
  JointDist j(dim_s, dim_i);
  for (std::size_t k = 0; k < dim_s; ++k) {
    for (std::size_t l = 0; l < dim_i; ++l) {
      double v;
      if (k == 0 && l == 0) {
        v = (1.0 - x) / denom;
      } else {
        v = 0.0;
        if (k > 0) v += cu * j(k - 1, l);
        if (l > 0) v += cv * j(k, l - 1);
        if (k > 0 && l > 0) v += cuv * j(k - 1, l - 1);
      }
      j(k, l) = v;
    }
  }
  j.close_mass();
  return j;
}

JointDist model_output(const ModelParams& params, std::size_t dim_s, std::size_t dim_i) {
  params.validate();
  require(dim_s >= 1 && dim_i >= 1, ErrorKind::InvalidParameter, "dims must be at least 1");
  const SchmidtSpectrum spec = schmidt_spectrum(params.k);
  const double gain = solve_gain(spec.lambdas, params.n_pdc);

  JointDist acc(dim_s, dim_i);
  acc(0, 0) = 1.0;
  bool first = true;
  for (double l : spec.lambdas) {
    const double t = std::tanh(gain * l);
    const double x = t * t;
    if (x == 0.0) continue;
    JointDist mode = lossy_tmsv(x, params.eta_s, params.eta_i, dim_s, dim_i);
    if (first) {
      acc = std::move(mode);
      first = false;
    } else {
      convolve_into(acc, trimmed_block(mode));
    }
  }

  const auto bs = lossy_background(params.n_alpha_s, params.n_th_s, params.eta_s, dim_s);
  const auto bi = lossy_background(params.n_alpha_i, params.n_th_i, params.eta_i, dim_i);
  if (bs.size() > 1 || bs[0] != 1.0) {
    JointDist out(dim_s, dim_i);
    for (std::size_t k = 0; k < dim_s; ++k) {
      for (std::size_t l = 0; l < dim_i; ++l) {
        double s = 0.0;
        for (std::size_t a = 0; a < std::min(bs.size(), k + 1); ++a) s += bs[a] * acc(k - a, l);
        out(k, l) = s;
      }
    }
    acc = std::move(out);
  }
  if (bi.size() > 1 || bi[0] != 1.0) {
    JointDist out(dim_s, dim_i);
    for (std::size_t k = 0; k < dim_s; ++k) {
      for (std::size_t l = 0; l < dim_i; ++l) {
        double s = 0.0;
        for (std::size_t b = 0; b < std::min(bi.size(), l + 1); ++b) s += bi[b] * acc(k, l - b);
        out(k, l) = s;
      }
    }
    acc = std::move(out);
  }
  acc.close_mass();
  return acc;
}

}  // namespace squeezelab
