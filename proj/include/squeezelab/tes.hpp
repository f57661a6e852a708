#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "squeezelab/error.hpp"

namespace squeezelab {

/// Phenomenological detector response: a fixed pulse shape whose amplitude
/// compresses as amplitude_scale * saturation_n * (1 - exp(-n / saturation_n)),
/// which is about n for n << saturation_n. Times in microseconds.
struct TraceModel {
  double rise_time = 0.2;
  double decay_time = 1.5;
  double amplitude_scale = 1.0;
  double saturation_n = 40.0;
  double noise_sigma = 0.38;
  double dt = 0.05;
  std::size_t samples = 200;

  void validate() const;
  double amplitude(double n) const;
  /// exp(-t/decay) - exp(-t/rise) at t = k dt.
  std::vector<double> pulse_shape() const;
};

using Trace = std::vector<double>;

Trace synth_trace(double n, const TraceModel& model, std::mt19937_64& rng);
/// Same trace for the same (n, model, seed).
Trace synth_trace(double n, const TraceModel& model, std::uint64_t seed);

struct CalibrationRun {
  double mean = 0.0;
  std::vector<Trace> traces;
};

/// 20 means log-spaced over [0.5, 80].
std::vector<double> default_calibration_means();

/// Poissonian runs of `traces_per_run` traces each; run r, trace t uses
/// stream r * traces_per_run + t of `seed`.
std::vector<CalibrationRun> synth_calibration_runs(const TraceModel& model, std::span<const double> means,
                                                   std::size_t traces_per_run, std::uint64_t seed);

/// Piecewise-linear overlap -> photon-number map, extrapolated linearly past
/// the outer anchors.
struct CalibrationMap {
  std::vector<double> overlaps;
  std::vector<double> photons;

  double operator()(double overlap) const;
};

struct TemplateSet {
  std::vector<Trace> templates;
  std::vector<double> mu;
  std::vector<CalibrationMap> maps;
  double dt = 0.0;
  double scale = 1.0;

  std::size_t size() const noexcept { return templates.size(); }
  /// sum_t V(t) * scale * Vbar_i(t) * dt.
  double overlap(std::size_t i, const Trace& trace) const;
  /// Reliability window mu_i -/+ 3 sqrt(mu_i).
  double window_lo(std::size_t i) const;
  double window_hi(std::size_t i) const;
};

inline constexpr std::size_t kMinTracesPerRun = 10000;

/// Template i is the mean trace of run i; map i pairs, for each photon
/// number k whose Poisson slice holds at least 100 expected traces inside
/// the reliability window, the median overlap of the traces ranked into the
/// slice [CDF(k-1), CDF(k)) with k.
TemplateSet calibrate_templates(std::span<const CalibrationRun> runs, double dt,
                                std::size_t min_traces = kMinTracesPerRun);

struct Classification {
  long photons = 0;
  std::size_t template_index = 0;
  std::vector<double> estimates;
  std::vector<bool> in_window;
};

/// Raised when no template's window contains its own estimate. Carries the
/// estimate closest to its template's window.
class OutOfRangeClassification : public Error {
 public:
  OutOfRangeClassification(double estimate, std::size_t template_index);

  double estimate() const noexcept { return estimate_; }
  std::size_t template_index() const noexcept { return template_index_; }

 private:
  double estimate_;
  std::size_t template_index_;
};

Classification classify(const Trace& trace, const TemplateSet& ts);

/// Copies of ts with every template multiplied by scale_lo and scale_hi.
std::pair<TemplateSet, TemplateSet> systematic_bounds(const TemplateSet& ts, double scale_lo, double scale_hi);

nlohmann::json to_json(const TraceModel& m);
TraceModel trace_model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TemplateSet& ts);
TemplateSet template_set_from_json(const nlohmann::json& doc);

/// CSV with one trace per row: id, then samples. The sidecar `<path>.json`
/// records dt, sample count, model and seed.
void write_traces(const std::string& path, std::span<const Trace> traces, const nlohmann::json& sidecar);
std::vector<Trace> read_traces(const std::string& path);

}  // namespace squeezelab
