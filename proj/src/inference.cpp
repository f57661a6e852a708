#include "squeezelab/inference.hpp"

#include <algorithm>
#include <cmath>

#include "squeezelab/channels.hpp"
#include "squeezelab/error.hpp"
#include "squeezelab/model.hpp"
#include "squeezelab/nelder_mead.hpp"
#include "squeezelab/numerics.hpp"
#include "squeezelab/parallel.hpp"
#include "squeezelab/sampling.hpp"

namespace squeezelab {

namespace {

constexpr int kMcBlock = 64;
constexpr double kMaxFailureShare = 0.01;

// Shifted first and second sums of one block of trials, per component.
struct Accumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  int ok = 0;
  int failed = 0;
};

// ---- fit coordinates ------------------------------------------------------

constexpr double kKOffset = 1e-6;

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double u) { return 1.0 / (1.0 + std::exp(-u)); }

std::vector<double> to_coords(const ModelParams& p) {
  auto clamp_unit = [](double x) { return std::clamp(x, 1e-9, 1.0 - 1e-9); };
  auto safe_log = [](double x) { return std::log(std::max(x, 1e-12)); };
  return {logit(clamp_unit(p.eta_s)), logit(clamp_unit(p.eta_i)), safe_log(p.n_pdc),
          std::log(p.k - 1.0 + kKOffset), safe_log(p.n_alpha_s), safe_log(p.n_alpha_i),
          safe_log(p.n_th_s), safe_log(p.n_th_i)};
}

ModelParams from_coords(std::span<const double> u) {
  ModelParams p;
  p.eta_s = expit(u[0]);
  p.eta_i = expit(u[1]);
  p.n_pdc = std::exp(u[2]);
  p.k = std::max(1.0, 1.0 + std::exp(u[3]) - kKOffset);
  p.n_alpha_s = std::exp(u[4]);
  p.n_alpha_i = std::exp(u[5]);
  p.n_th_s = std::exp(u[6]);
  p.n_th_i = std::exp(u[7]);
  return p;
}

struct Weights {
  std::vector<double> inv_sigma;
};

Weights fit_weights(const JointDist& measured) {
  require(measured.n_events().has_value(), ErrorKind::InvalidData,
          "the fit needs the event count of the measured histogram");
  const double n = static_cast<double>(*measured.n_events());
  Weights w;
  w.inv_sigma.reserve(measured.size());
  for (double p : measured.probs()) w.inv_sigma.push_back(1.0 / bin_sigma(p, n));
  return w;
}

double weighted_ssq(const JointDist& measured, const JointDist& predicted, const Weights& w) {
  CompensatedSum s;
  const auto pm = measured.probs();
  const auto po = predicted.probs();
  for (std::size_t b = 0; b < pm.size(); ++b) {
    const double r = (pm[b] - po[b]) * w.inv_sigma[b];
    s.add(r * r);
  }
  return s.value();
}

struct JointMoments {
  double mass = 0.0, mean_s = 0.0, mean_i = 0.0, var_s = 0.0, var_i = 0.0, cov = 0.0;
};

JointMoments joint_moments(const JointDist& j) {
  CompensatedSum mass, s, i;
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      mass.add(j(m, n));
      s.add(static_cast<double>(m) * j(m, n));
      i.add(static_cast<double>(n) * j(m, n));
    }
  }
  JointMoments out;
  out.mass = mass.value();
  require(out.mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  out.mean_s = s.value() / out.mass;
  out.mean_i = i.value() / out.mass;
  CompensatedSum vs, vi, c;
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      const double ds = static_cast<double>(m) - out.mean_s;
      const double di = static_cast<double>(n) - out.mean_i;
      vs.add(j(m, n) * ds * ds);
      vi.add(j(m, n) * di * di);
      c.add(j(m, n) * ds * di);
    }
  }
  out.var_s = vs.value() / out.mass;
  out.var_i = vi.value() / out.mass;
  out.cov = c.value() / out.mass;
  return out;
}

}  // namespace

std::vector<MCReport> mc_std_all(const JointDist& j, std::uint64_t n_events, int trials,
                                 const Statistic& stat, std::uint64_t seed) {
  require(trials >= 2, ErrorKind::InvalidParameter, "Monte-Carlo needs at least 2 trials");
  require(n_events > 0, ErrorKind::InvalidParameter, "n_events must be positive");
  const std::vector<double> point = stat.eval(j);
  const std::size_t width = point.size();
  const CountSampler sampler(j);

  const auto blocks = static_cast<std::size_t>((trials + kMcBlock - 1) / kMcBlock);
  std::vector<Accumulator> acc(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    Accumulator& a = acc[b];
    a.sum.assign(width, 0.0);
    a.sum_sq.assign(width, 0.0);
    const int begin = static_cast<int>(b) * kMcBlock;
    const int end = std::min(trials, begin + kMcBlock);
    for (int t = begin; t < end; ++t) {
      auto rng = stream_rng(seed, static_cast<std::uint64_t>(t));
      const JointDist sample = sampler.draw(n_events, rng);
      std::vector<double> v;
      try {
        v = stat.eval(sample);
      } catch (const Error&) {
        ++a.failed;
        continue;
      }
      if (v.size() != width || !std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
        ++a.failed;
        continue;
      }
      ++a.ok;
      for (std::size_t c = 0; c < width; ++c) {
        const double d = v[c] - point[c];
        a.sum[c] += d;
        a.sum_sq[c] += d * d;
      }
    }
  });

  std::vector<double> sum(width, 0.0), sum_sq(width, 0.0);
  int ok = 0, failed = 0;
  for (const Accumulator& a : acc) {
    ok += a.ok;
    failed += a.failed;
    for (std::size_t c = 0; c < width; ++c) {
      sum[c] += a.sum[c];
      sum_sq[c] += a.sum_sq[c];
    }
  }
  require(static_cast<double>(failed) <= kMaxFailureShare * trials && ok >= 2, ErrorKind::UnreliableMC,
          "statistic '" + stat.name + "' failed on " + std::to_string(failed) + " of " +
              std::to_string(trials) + " resamples");

  std::vector<MCReport> out(width);
  const double k = ok;
  for (std::size_t c = 0; c < width; ++c) {
    MCReport& r = out[c];
    r.statistic = stat.labels.size() == width ? stat.labels[c] : stat.name;
    r.point_estimate = point[c];
    const double var = (sum_sq[c] - sum[c] * sum[c] / k) / (k - 1.0);
    r.std = std::sqrt(std::max(0.0, var));
    r.trials = trials;
    r.n_events = n_events;
    r.seed = seed;
    r.failures = failed;
  }
  return out;
}

MCReport mc_std(const JointDist& j, std::uint64_t n_events, int trials, const Statistic& stat,
                std::uint64_t seed) {
  auto all = mc_std_all(j, n_events, trials, stat, seed);
  require(all.size() == 1, ErrorKind::InvalidParameter, "mc_std needs a single-valued statistic");
  return all.front();
}

double fit_objective(const JointDist& measured, const ModelParams& params) {
  const Weights w = fit_weights(measured);
  return weighted_ssq(measured, model_output(params, measured.dim_s(), measured.dim_i()), w);
}

ModelParams initial_guess(const JointDist& measured) {
  const JointMoments mo = joint_moments(measured);
  require(mo.mean_s > 0.0 && mo.mean_i > 0.0, ErrorKind::ZeroMean,
          "cannot start a fit from a histogram with zero mean");
  // Marginal g2 = 1 + 1/K for a K-mode thermal source; background ignored.
  const double g2 = 0.5 * ((mo.var_s - mo.mean_s) / (mo.mean_s * mo.mean_s) +
                           (mo.var_i - mo.mean_i) / (mo.mean_i * mo.mean_i)) + 1.0;
  ModelParams p;
  p.k = g2 > 1.2 ? std::clamp(1.0 / (g2 - 1.0), 1.001, 5.0) : 5.0;
  // Cov = eta_s eta_i (n + n^2 / K), the Klyshko relation for K modes.
  p.eta_s = std::clamp(mo.cov / mo.mean_i - mo.mean_s / p.k, 0.05, 0.95);
  p.eta_i = std::clamp(mo.cov / mo.mean_s - mo.mean_i / p.k, 0.05, 0.95);
  p.n_pdc = std::max(1e-3, 0.5 * (mo.mean_s / p.eta_s + mo.mean_i / p.eta_i));
  p.n_alpha_s = p.n_alpha_i = 0.05;
  p.n_th_s = p.n_th_i = 0.05;
  return p;
}

FitResult fit_model(const JointDist& measured, std::optional<ModelParams> init, const FitOptions& options) {
  require(options.multistarts >= 1, ErrorKind::InvalidParameter, "need at least one start");
  const Weights w = fit_weights(measured);
  const ModelParams start = init ? *init : initial_guess(measured);
  start.validate();
  const std::vector<double> u0 = to_coords(start);

  auto objective = [&](std::span<const double> u) {
    const JointDist pred = model_output(from_coords(u), measured.dim_s(), measured.dim_i());
    return weighted_ssq(measured, pred, w);
  };

  NelderMeadOptions nm;
  nm.diameter_tol = options.diameter_tol;
  nm.max_evaluations = options.max_evaluations;

  std::vector<NelderMeadResult> runs(static_cast<std::size_t>(options.multistarts));
  parallel_for(runs.size(), [&](std::size_t s) {
    std::vector<double> x = u0;
    if (s > 0) {
      auto rng = stream_rng(options.seed, s);
      std::normal_distribution<double> jitter(0.0, options.start_spread);
      for (double& v : x) v += jitter(rng);
    }
    runs[s] = nelder_mead(objective, x, nm);
  });

  std::size_t best = 0;
  int evaluations = 0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    evaluations += runs[s].evaluations;
    if (runs[s].value < runs[best].value) best = s;
  }
  // One restart from the winner guards against a collapsed simplex.
  NelderMeadOptions again = nm;
  again.initial_step = 0.05;
  NelderMeadResult polished = nelder_mead(objective, runs[best].x, again);
  evaluations += polished.evaluations;
  if (polished.value <= runs[best].value) {
    polished.iterations += runs[best].iterations;
    runs[best] = std::move(polished);
  }

  FitResult result;
  result.params = from_coords(runs[best].x);
  result.residual = runs[best].value;
  result.iterations = runs[best].iterations;
  result.evaluations = evaluations;
  result.converged = runs[best].converged;
  result.multistarts = options.multistarts;
  result.seed = options.seed;
  result.fidelity = fidelity(measured, model_output(result.params, measured.dim_s(), measured.dim_i()));
  return result;
}

KlyshkoEstimate klyshko_efficiency(const JointDist& counts) {
  const JointMoments mo = joint_moments(counts);
  require(mo.mean_s > 0.0 && mo.mean_i > 0.0, ErrorKind::ZeroMean,
          "Klyshko estimate needs nonzero means in both arms");
  KlyshkoEstimate est;
  est.eta_i = mo.cov / mo.mean_s - mo.mean_i;
  est.eta_s = mo.cov / mo.mean_i - mo.mean_s;
  auto check = [&](double eta, const char* arm) {
    if (eta < 0.0 || eta > 1.0) {
      est.model_violation = true;
      est.warnings.push_back(std::string(arm) + " efficiency estimate outside [0, 1]");
    }
  };
  check(est.eta_s, "signal");
  check(est.eta_i, "idler");
  return est;
}

double fit_pump_curve(std::span<const PumpPoint> points) {
  require(points.size() >= 2, ErrorKind::InvalidParameter, "pump curve fit needs at least 2 points");
  double lo = INFINITY, hi = 0.0;
  for (const PumpPoint& pt : points) {
    require(pt.power >= 0.0 && pt.mean_photons >= 0.0 && std::isfinite(pt.power) &&
                std::isfinite(pt.mean_photons),
            ErrorKind::InvalidData, "pump points must be finite and non-negative");
    if (pt.power > 0.0) {
      const double a = std::asinh(std::sqrt(pt.mean_photons)) / std::sqrt(pt.power);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  require(std::isfinite(lo), ErrorKind::InvalidData, "all pump powers are zero");
  // Every residual shares one sign outside [lo, hi], so the optimum is inside.
  auto ssq = [&](double alpha) {
    CompensatedSum s;
    for (const PumpPoint& pt : points) {
      const double sh = std::sinh(alpha * std::sqrt(pt.power));
      const double r = sh * sh - pt.mean_photons;
      s.add(r * r);
    }
    return s.value();
  };
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = ssq(c), fd = ssq(d);
  for (int it = 0; it < 300 && (b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = ssq(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = ssq(d);
    }
  }
  return 0.5 * (a + b);
}

double fidelity(const JointDist& p, const JointDist& q) {
  require(p.dim_s() == q.dim_s() && p.dim_i() == q.dim_i(), ErrorKind::DimMismatch,
          "fidelity needs distributions of equal dimensions");
  CompensatedSum s;
  const auto a = p.probs();
  const auto b = q.probs();
  for (std::size_t k = 0; k < a.size(); ++k) s.add(std::sqrt(a[k] * b[k]));
  // Mass outside the window is one more outcome.
  s.add(std::sqrt(std::max(0.0, p.truncated_mass()) * std::max(0.0, q.truncated_mass())));
  const double f = s.value();
  return std::min(1.0, f * f);
}

nlohmann::json to_json(const MCReport& r) {
  return {{"statistic", r.statistic}, {"point_estimate", r.point_estimate}, {"std", r.std},
          {"trials", r.trials},       {"n_events", r.n_events},             {"seed", r.seed},
          {"failures", r.failures}};
}

nlohmann::json to_json(const ModelParams& p) {
  return {{"eta_s", p.eta_s},         {"eta_i", p.eta_i},         {"n_pdc", p.n_pdc},
          {"k", p.k},                 {"n_alpha_s", p.n_alpha_s}, {"n_alpha_i", p.n_alpha_i},
          {"n_th_s", p.n_th_s},       {"n_th_i", p.n_th_i}};
}

nlohmann::json to_json(const FitResult& r) {
  return {{"params", to_json(r.params)}, {"residual", r.residual},   {"fidelity", r.fidelity},
          {"iterations", r.iterations},  {"evaluations", r.evaluations}, {"converged", r.converged},
          {"multistarts", r.multistarts}, {"seed", r.seed}};
}

ModelParams params_from_json(const nlohmann::json& doc) {
  ModelParams p;
  try {
    p.eta_s = doc.value("eta_s", p.eta_s);
    p.eta_i = doc.value("eta_i", p.eta_i);
    p.n_pdc = doc.value("n_pdc", p.n_pdc);
    p.k = doc.value("k", p.k);
    p.n_alpha_s = doc.value("n_alpha_s", p.n_alpha_s);
    p.n_alpha_i = doc.value("n_alpha_i", p.n_alpha_i);
    p.n_th_s = doc.value("n_th_s", p.n_th_s);
    p.n_th_i = doc.value("n_th_i", p.n_th_i);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidData, std::string("malformed model parameters: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace squeezelab
