#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "squeezelab/distributions.hpp"
#include "squeezelab/statistics.hpp"

namespace squeezelab {

inline constexpr int kDefaultMcTrials = 10000;

struct MCReport {
  std::string statistic;
  double point_estimate = 0.0;
  double std = 0.0;
  int trials = 0;
  std::uint64_t n_events = 0;
  std::uint64_t seed = 0;
  /// Resamples on which the statistic could not be evaluated; excluded.
  int failures = 0;
};

/// Monte-Carlo spread of every component of `stat`: `trials` histograms of
/// n_events draws from j, the statistic recomputed on each. Trial t uses RNG
/// stream (seed, t) and results are reduced in trial order, so the output
/// does not depend on the thread count. More than 1% failed trials is an
/// UnreliableMC error.
std::vector<MCReport> mc_std_all(const JointDist& j, std::uint64_t n_events, int trials,
                                 const Statistic& stat, std::uint64_t seed);

/// Single-valued form of mc_std_all.
MCReport mc_std(const JointDist& j, std::uint64_t n_events, int trials, const Statistic& stat,
                std::uint64_t seed);

struct FitOptions {
  int multistarts = 16;
  double diameter_tol = 1e-8;
  int max_evaluations = 20000;
  /// Spread of the random starts around the initial point, in transformed
  /// coordinates.
  double start_spread = 0.5;
  std::uint64_t seed = 0;
};

struct FitResult {
  ModelParams params;
  /// Weighted sum of squares at the optimum.
  double residual = 0.0;
  double fidelity = 0.0;
  /// Simplex iterations of the winning start.
  int iterations = 0;
  /// Objective evaluations over all starts.
  int evaluations = 0;
  bool converged = false;
  int multistarts = 0;
  std::uint64_t seed = 0;
};

/// sum_mn ((p_meas - p_out) / sigma_mn)^2 with p_out the model prediction on
/// the measured window and sigma_mn = 1/N + sqrt(p_meas / N).
double fit_objective(const JointDist& measured, const ModelParams& params);

/// Starting point from moments of the histogram: covariance-based
/// efficiencies, mean photon numbers, K from the marginal g2.
ModelParams initial_guess(const JointDist& measured);

/// Eight-parameter weighted least-squares fit of the lossy model. Nelder-Mead
/// in logit/log coordinates from `multistarts` seeded starts.
FitResult fit_model(const JointDist& measured, std::optional<ModelParams> init = std::nullopt,
                    const FitOptions& options = {});

struct KlyshkoEstimate {
  double eta_s = 0.0;
  double eta_i = 0.0;
  /// Set when an estimate falls outside [0, 1], i.e. the data contradict the
  /// single-mode perfectly-correlated source the estimator assumes.
  bool model_violation = false;
  std::vector<std::string> warnings;
};

/// Efficiencies from singles and covariance assuming a single-mode thermal
/// source with perfect photon-number correlations:
/// eta_i = Cov(n_s, n_i) / <n_s> - <n_i>, and symmetrically for eta_s.
KlyshkoEstimate klyshko_efficiency(const JointDist& counts);

struct PumpPoint {
  double power = 0.0;
  double mean_photons = 0.0;
};

/// Least-squares alpha for <n> = sinh^2(alpha sqrt(P)) by golden-section search.
double fit_pump_curve(std::span<const PumpPoint> points);

/// Classical fidelity (sum_mn sqrt(p_mn q_mn))^2, the truncated masses
/// counted as one extra outcome.
double fidelity(const JointDist& p, const JointDist& q);

nlohmann::json to_json(const MCReport& r);
nlohmann::json to_json(const ModelParams& p);
nlohmann::json to_json(const FitResult& r);
ModelParams params_from_json(const nlohmann::json& doc);

}  // namespace squeezelab
