#include "squeezelab/tes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "squeezelab/format.hpp"
#include "squeezelab/jpnd_io.hpp"
#include "squeezelab/parallel.hpp"
#include "squeezelab/sampling.hpp"

namespace squeezelab {

namespace {

constexpr std::size_t kTemplateCount = 20;
constexpr double kMinSliceCount = 100.0;
constexpr double kWindowSigmas = 3.0;

double poisson_pmf(long k, double mu) {
  if (mu == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(static_cast<double>(k) * std::log(mu) - mu - std::lgamma(static_cast<double>(k) + 1.0));
}

double dot(const Trace& a, const Trace& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += a[t] * b[t];
  return s;
}

}  // namespace

void TraceModel::validate() const {
  require(rise_time > 0.0 && decay_time > 0.0 && rise_time < decay_time, ErrorKind::InvalidParameter,
          "pulse times must satisfy 0 < rise_time < decay_time");
  require(amplitude_scale > 0.0 && saturation_n > 0.0, ErrorKind::InvalidParameter,
          "amplitude_scale and saturation_n must be positive");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorKind::InvalidParameter,
          "noise_sigma must be finite and non-negative");
  require(dt > 0.0 && samples > 0, ErrorKind::InvalidParameter, "dt and the sample count must be positive");
}

double TraceModel::amplitude(double n) const {
  return amplitude_scale * saturation_n * -std::expm1(-n / saturation_n);
}

std::vector<double> TraceModel::pulse_shape() const {
  std::vector<double> shape(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    shape[k] = std::exp(-t / decay_time) - std::exp(-t / rise_time);
  }
  return shape;
}

Trace synth_trace(double n, const TraceModel& model, std::mt19937_64& rng) {
  require(n >= 0.0, ErrorKind::InvalidParameter, "photon number must be non-negative");
  Trace trace = model.pulse_shape();
  const double a = model.amplitude(n);
  for (double& v : trace) v *= a;
  if (model.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, model.noise_sigma);
    for (double& v : trace) v += noise(rng);
  }
  return trace;
}

Trace synth_trace(double n, const TraceModel& model, std::uint64_t seed) {
  model.validate();
  auto rng = stream_rng(seed, 0);
  return synth_trace(n, model, rng);
}

std::vector<double> default_calibration_means() {
  std::vector<double> means(kTemplateCount);
  for (std::size_t i = 0; i < kTemplateCount; ++i) {
    means[i] = 0.5 * std::pow(160.0, static_cast<double>(i) / static_cast<double>(kTemplateCount - 1));
  }
  return means;
}

std::vector<CalibrationRun> synth_calibration_runs(const TraceModel& model, std::span<const double> means,
                                                   std::size_t traces_per_run, std::uint64_t seed) {
  model.validate();
  std::vector<CalibrationRun> runs(means.size());
  for (std::size_t r = 0; r < means.size(); ++r) {
    require(means[r] > 0.0, ErrorKind::InvalidParameter, "calibration means must be positive");
    runs[r].mean = means[r];
    runs[r].traces.resize(traces_per_run);
  }
  parallel_for(means.size() * traces_per_run, [&](std::size_t u) {
    const std::size_t r = u / traces_per_run;
    auto rng = stream_rng(seed, u);
    std::poisson_distribution<long> photons(means[r]);
    const auto n = static_cast<double>(photons(rng));
    runs[r].traces[u % traces_per_run] = synth_trace(n, model, rng);
  });
  return runs;
}

double CalibrationMap::operator()(double overlap) const {
  const std::size_t n = overlaps.size();
  if (n == 1) return photons[0];
  auto hi = std::upper_bound(overlaps.begin(), overlaps.end(), overlap);
  std::size_t k = static_cast<std::size_t>(hi - overlaps.begin());
  k = std::clamp<std::size_t>(k, 1, n - 1);
  const double slope = (photons[k] - photons[k - 1]) / (overlaps[k] - overlaps[k - 1]);
  return photons[k - 1] + slope * (overlap - overlaps[k - 1]);
}

double TemplateSet::overlap(std::size_t i, const Trace& trace) const {
  require(trace.size() == templates[i].size(), ErrorKind::DimMismatch,
          "trace length differs from the template length");
  return scale * dot(trace, templates[i]) * dt;
}

double TemplateSet::window_lo(std::size_t i) const { return mu[i] - kWindowSigmas * std::sqrt(mu[i]); }
double TemplateSet::window_hi(std::size_t i) const { return mu[i] + kWindowSigmas * std::sqrt(mu[i]); }

TemplateSet calibrate_templates(std::span<const CalibrationRun> runs, double dt, std::size_t min_traces) {
  require(!runs.empty(), ErrorKind::InvalidParameter, "calibration needs at least one run");
  require(dt > 0.0, ErrorKind::InvalidParameter, "dt must be positive");
  TemplateSet ts;
  ts.dt = dt;
  const std::size_t length = runs.front().traces.empty() ? 0 : runs.front().traces.front().size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    require(runs[r].traces.size() >= min_traces, ErrorKind::CalibrationFailure,
            "calibration run " + std::to_string(r) + " has " + std::to_string(runs[r].traces.size()) +
                " traces, need " + std::to_string(min_traces));
    require(r == 0 || runs[r].mean > runs[r - 1].mean, ErrorKind::CalibrationFailure,
            "calibration means must be strictly increasing");
    for (const Trace& t : runs[r].traces) {
      require(t.size() == length && length > 0, ErrorKind::DimMismatch, "calibration traces differ in length");
    }
  }

  ts.templates.resize(runs.size());
  ts.mu.resize(runs.size());
  ts.maps.resize(runs.size());
  parallel_for(runs.size(), [&](std::size_t r) {
    const CalibrationRun& run = runs[r];
    const std::size_t count = run.traces.size();
    Trace mean(length, 0.0);
    for (const Trace& t : run.traces) {
      for (std::size_t k = 0; k < length; ++k) mean[k] += t[k];
    }
    for (double& v : mean) v /= static_cast<double>(count);

    std::vector<double> overlaps(count);
    for (std::size_t t = 0; t < count; ++t) overlaps[t] = dot(run.traces[t], mean) * dt;
    std::sort(overlaps.begin(), overlaps.end());

    const double mu = run.mean;
    const double lo = mu - kWindowSigmas * std::sqrt(mu);
    const double hi = mu + kWindowSigmas * std::sqrt(mu);
    CalibrationMap map;
    double cdf = 0.0;
    const auto n = static_cast<double>(count);
    for (long k = 0; static_cast<double>(k) <= hi; ++k) {
      const double pmf = poisson_pmf(k, mu);
      const double below = cdf;
      cdf += pmf;
      if (static_cast<double>(k) < lo || pmf * n < kMinSliceCount) continue;
      const auto first = static_cast<std::size_t>(std::floor(below * n));
      const auto last = std::min(count, static_cast<std::size_t>(std::floor(cdf * n)));
      if (last <= first) continue;
      const std::size_t mid = first + (last - first) / 2;
      const double median = (last - first) % 2 == 1 ? overlaps[mid] : 0.5 * (overlaps[mid - 1] + overlaps[mid]);
      map.overlaps.push_back(median);
      map.photons.push_back(static_cast<double>(k));
    }
    if (map.overlaps.size() < 2) {
      throw Error(ErrorKind::CalibrationFailure,
                  "calibration run " + std::to_string(r) + " yields fewer than two anchors");
    }
    for (std::size_t a = 1; a < map.overlaps.size(); ++a) {
      if (!(map.overlaps[a] > map.overlaps[a - 1])) {
        throw Error(ErrorKind::CalibrationFailure,
                    "overlap is not increasing in photon number for run " + std::to_string(r));
      }
    }
    ts.templates[r] = std::move(mean);
    ts.mu[r] = mu;
    ts.maps[r] = std::move(map);
  });
  return ts;
}

OutOfRangeClassification::OutOfRangeClassification(double estimate, std::size_t template_index)
    : Error(ErrorKind::OutOfRange,
            "no template window contains the trace; nearest estimate " + format_double(estimate)),
      estimate_(estimate),
      template_index_(template_index) {}

Classification classify(const Trace& trace, const TemplateSet& ts) {
  require(ts.size() > 0, ErrorKind::InvalidParameter, "empty template set");
  Classification c;
  c.estimates.resize(ts.size());
  c.in_window.resize(ts.size());
  std::size_t best = ts.size();
  std::size_t nearest = 0;
  double nearest_gap = INFINITY;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double est = ts.maps[i](ts.overlap(i, trace));
    c.estimates[i] = est;
    const double lo = ts.window_lo(i);
    const double hi = ts.window_hi(i);
    c.in_window[i] = est >= lo && est <= hi;
    const double gap = est < lo ? lo - est : (est > hi ? est - hi : 0.0);
    if (gap < nearest_gap) {
      nearest_gap = gap;
      nearest = i;
    }
    if (c.in_window[i] &&
        (best == ts.size() || std::abs(est - ts.mu[i]) < std::abs(c.estimates[best] - ts.mu[best]))) {
      best = i;
    }
  }
  if (best == ts.size()) throw OutOfRangeClassification(c.estimates[nearest], nearest);
  c.template_index = best;
  c.photons = std::max(0L, std::lround(c.estimates[best]));
  return c;
}

std::pair<TemplateSet, TemplateSet> systematic_bounds(const TemplateSet& ts, double scale_lo, double scale_hi) {
  require(scale_lo > 0.0 && scale_lo < 1.0 && scale_hi > 1.0 && std::isfinite(scale_hi),
          ErrorKind::InvalidParameter, "scales must satisfy 0 < scale_lo < 1 < scale_hi");
  std::pair<TemplateSet, TemplateSet> out{ts, ts};
  out.first.scale = ts.scale * scale_lo;
  out.second.scale = ts.scale * scale_hi;
  return out;
}

nlohmann::json to_json(const TraceModel& m) {
  return {{"rise_time", m.rise_time},       {"decay_time", m.decay_time}, {"amplitude_scale", m.amplitude_scale},
          {"saturation_n", m.saturation_n}, {"noise_sigma", m.noise_sigma}, {"dt", m.dt},
          {"samples", m.samples}};
}

TraceModel trace_model_from_json(const nlohmann::json& doc) {
  TraceModel m;
  try {
    m.rise_time = doc.value("rise_time", m.rise_time);
    m.decay_time = doc.value("decay_time", m.decay_time);
    m.amplitude_scale = doc.value("amplitude_scale", m.amplitude_scale);
    m.saturation_n = doc.value("saturation_n", m.saturation_n);
    m.noise_sigma = doc.value("noise_sigma", m.noise_sigma);
    m.dt = doc.value("dt", m.dt);
    m.samples = doc.value("samples", m.samples);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidData, std::string("malformed trace model: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json to_json(const TemplateSet& ts) {
  nlohmann::json doc = {{"format", "tes-templates-v1"}, {"dt", ts.dt}, {"scale", ts.scale}};
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    list.push_back({{"mu", ts.mu[i]},
                    {"template", ts.templates[i]},
                    {"map_overlaps", ts.maps[i].overlaps},
                    {"map_photons", ts.maps[i].photons}});
  }
  doc["templates"] = std::move(list);
  return doc;
}

TemplateSet template_set_from_json(const nlohmann::json& doc) {
  TemplateSet ts;
  try {
    require(doc.value("format", "") == "tes-templates-v1", ErrorKind::InvalidData,
            "not a tes-templates-v1 document");
    ts.dt = doc.at("dt").get<double>();
    ts.scale = doc.value("scale", 1.0);
    for (const auto& entry : doc.at("templates")) {
      ts.mu.push_back(entry.at("mu").get<double>());
      ts.templates.push_back(entry.at("template").get<Trace>());
      CalibrationMap map;
      map.overlaps = entry.at("map_overlaps").get<std::vector<double>>();
      map.photons = entry.at("map_photons").get<std::vector<double>>();
      require(!map.overlaps.empty() && map.overlaps.size() == map.photons.size(), ErrorKind::InvalidData,
              "calibration map arrays are empty or differ in length");
      ts.maps.push_back(std::move(map));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidData, std::string("malformed template set: ") + e.what());
  }
  require(!ts.templates.empty(), ErrorKind::InvalidData, "template set is empty");
  for (std::size_t i = 1; i < ts.size(); ++i) {
    require(ts.mu[i] > ts.mu[i - 1], ErrorKind::InvalidData, "template means must be strictly increasing");
  }
  return ts;
}

void write_traces(const std::string& path, std::span<const Trace> traces, const nlohmann::json& sidecar) {
  std::string text;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    text += std::to_string(t);
    for (double v : traces[t]) {
      text += ',';
      text += format_double(v);
    }
    text += '\n';
  }
  write_text(path, text);
  write_text(path + ".json", dump_json(sidecar, 2) + "\n");
}

std::vector<Trace> read_traces(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<Trace> traces;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    Trace trace;
    std::size_t pos = line.find(',');
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string cell = line.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str() && *end == '\0' && std::isfinite(v), ErrorKind::InvalidData,
              path + ": bad sample on row " + std::to_string(row));
      trace.push_back(v);
      pos = next;
    }
    require(!trace.empty(), ErrorKind::InvalidData, path + ": row " + std::to_string(row) + " has no samples");
    require(traces.empty() || trace.size() == traces.front().size(), ErrorKind::InvalidData,
            path + ": traces differ in length");
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace squeezelab
