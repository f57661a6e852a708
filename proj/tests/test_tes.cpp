#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "squeezelab/error.hpp"
#include "squeezelab/jpnd_io.hpp"
#include "squeezelab/tes.hpp"

using namespace squeezelab;

namespace {

TraceModel noiseless() {
  TraceModel m;
  m.noise_sigma = 0.0;
  return m;
}

double poisson_cdf(long k, double mu) {
  double term = std::exp(-mu), sum = 0.0;
  for (long j = 0; j <= k; ++j) {
    sum += term;
    term *= mu / static_cast<double>(j + 1);
  }
  return sum;
}

// Small calibration shared by several cases.
const TemplateSet& small_set() {
  static const TemplateSet ts = [] {
    const std::vector<double> means = {0.5, 1.0, 2.0, 4.0, 8.0};
    const auto runs = synth_calibration_runs(TraceModel{}, means, 4000, 21);
    return calibrate_templates(runs, TraceModel{}.dt, 4000);
  }();
  return ts;
}

}  // namespace

TEST_CASE("trace model") {
  const TraceModel m;
  m.validate();
  CHECK(m.amplitude(0.0) == 0.0);
  for (double n = 1.0; n < 100.0; n += 1.0) {
    CHECK(m.amplitude(n) > m.amplitude(n - 1.0));
    CHECK(m.amplitude(2.0 * n) < 2.0 * m.amplitude(n));
  }
  CHECK(m.amplitude(1.0) == doctest::Approx(1.0).epsilon(0.02));

  const auto shape = m.pulse_shape();
  REQUIRE(shape.size() == m.samples);
  CHECK(shape[0] == 0.0);
  for (double v : shape) CHECK(v >= 0.0);

  TraceModel bad;
  bad.rise_time = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TraceModel{};
  bad.noise_sigma = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = TraceModel{};
  bad.samples = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("synthetic traces") {
  const TraceModel clean = noiseless();
  const Trace zero = synth_trace(0.0, clean, 1);
  for (double v : zero) CHECK(v == 0.0);

  const Trace five = synth_trace(5.0, clean, 1);
  const auto shape = clean.pulse_shape();
  for (std::size_t k = 0; k < shape.size(); ++k) {
    CHECK(std::abs(five[k] - clean.amplitude(5.0) * shape[k]) < 1e-12);
  }

  const TraceModel noisy;
  const Trace a = synth_trace(3.0, noisy, 7);
  const Trace b = synth_trace(3.0, noisy, 7);
  const Trace c = synth_trace(3.0, noisy, 8);
  CHECK(a == b);
  CHECK(a != c);
  // The noise is white with the configured sigma.
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double r = a[k] - noisy.amplitude(3.0) * shape[k];
    ss += r * r;
  }
  CHECK(std::sqrt(ss / a.size()) == doctest::Approx(noisy.noise_sigma).epsilon(0.15));
  CHECK_THROWS_AS(synth_trace(-1.0, noisy, 1), Error);
}

TEST_CASE("calibration means") {
  const auto means = default_calibration_means();
  REQUIRE(means.size() == 20);
  CHECK(means.front() == doctest::Approx(0.5));
  CHECK(means.back() == doctest::Approx(80.0));
  for (std::size_t i = 1; i < means.size(); ++i) {
    CHECK(means[i] / means[i - 1] == doctest::Approx(means[1] / means[0]));
  }
}

TEST_CASE("noiseless calibration") {
  const TraceModel clean = noiseless();
  const std::vector<double> means = {1.0, 3.0};
  const auto runs = synth_calibration_runs(clean, means, 20000, 4);
  REQUIRE(runs.size() == 2);
  REQUIRE(runs[0].traces.size() == 20000);
  const TemplateSet ts = calibrate_templates(runs, clean.dt);

  // A noiseless template is the pulse shape times the mean amplitude.
  const auto shape = clean.pulse_shape();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      num += ts.templates[i][k] * shape[k];
      den += shape[k] * shape[k];
    }
    const double c = num / den;
    CHECK(c == doctest::Approx(clean.amplitude(means[i])).epsilon(0.05));
    for (std::size_t k = 0; k < shape.size(); ++k) CHECK(std::abs(ts.templates[i][k] - c * shape[k]) < 1e-12);
  }

  // Anchors: every k whose Poisson slice holds 100 traces in the window, and
  // the anchor overlap is the overlap of a k-photon trace.
  const CalibrationMap& map = ts.maps[0];
  std::vector<double> expected;
  for (long k = 0; k <= 4; ++k) {
    const double pmf = poisson_cdf(k, 1.0) - (k > 0 ? poisson_cdf(k - 1, 1.0) : 0.0);
    if (k >= 1.0 - 3.0 && k <= 1.0 + 3.0 && pmf * 20000 >= 100) expected.push_back(static_cast<double>(k));
  }
  CHECK(map.photons == expected);
  for (std::size_t a = 0; a < map.photons.size(); ++a) {
    const double ov = ts.overlap(0, synth_trace(map.photons[a], clean, 1));
    CHECK(map.overlaps[a] == doctest::Approx(ov).epsilon(1e-12));
  }

  for (long n : {0L, 1L, 2L, 3L, 5L}) CHECK(classify(synth_trace(n, clean, 1), ts).photons == n);
}

TEST_CASE("calibration map") {
  const CalibrationMap map{{1.0, 2.0, 4.0}, {1.0, 2.0, 3.0}};
  CHECK(map(1.5) == doctest::Approx(1.5));
  CHECK(map(3.0) == doctest::Approx(2.5));
  CHECK(map(0.0) == doctest::Approx(0.0));
  CHECK(map(6.0) == doctest::Approx(4.0));
}

TEST_CASE("calibration errors") {
  const TraceModel m;
  const std::vector<double> means = {1.0, 2.0};
  const auto runs = synth_calibration_runs(m, means, 500, 1);
  try {
    calibrate_templates(runs, m.dt);
    FAIL("expected CalibrationFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CalibrationFailure);
  }
  const std::vector<double> down = {2.0, 1.0};
  CHECK_THROWS_AS(calibrate_templates(synth_calibration_runs(m, down, 500, 1), m.dt, 500), Error);
  // 150 traces at mu = 1 leave fewer than two slices with 100 expected traces.
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(calibrate_templates(synth_calibration_runs(m, one, 150, 1), m.dt, 150), Error);
  CHECK_THROWS_AS(synth_calibration_runs(m, std::vector<double>{0.0}, 10, 1), Error);
}

TEST_CASE("classification with noise") {
  const TemplateSet& ts = small_set();
  const TraceModel m;
  int right = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const long n = static_cast<long>(s % 6);
    const Classification c = classify(synth_trace(static_cast<double>(n), m, 100 + s), ts);
    right += c.photons == n;
    CHECK(c.estimates.size() == ts.size());
    CHECK(c.in_window[c.template_index]);
  }
  CHECK(right >= 495);

  // Overlaps grow with photon number.
  const TraceModel clean = noiseless();
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (int n = 1; n < 30; ++n)
      CHECK(ts.overlap(i, synth_trace(n, clean, 1)) > ts.overlap(i, synth_trace(n - 1, clean, 1)));

  try {
    classify(synth_trace(200.0, clean, 1), ts);
    FAIL("expected OutOfRangeClassification");
  } catch (const OutOfRangeClassification& e) {
    CHECK(e.kind() == ErrorKind::OutOfRange);
    CHECK(e.template_index() == ts.size() - 1);
    CHECK(e.estimate() > ts.window_hi(ts.size() - 1));
  }
  CHECK_THROWS_AS(classify(Trace(10, 0.0), ts), Error);
}

TEST_CASE("systematic bounds") {
  const TemplateSet& ts = small_set();
  const auto [lo, hi] = systematic_bounds(ts, 0.95, 1.05);
  CHECK(lo.scale == doctest::Approx(0.95));
  CHECK(hi.scale == doctest::Approx(1.05));
  const Trace t = synth_trace(4.0, noiseless(), 1);
  const auto c = classify(t, ts);
  const std::size_t i = c.template_index;
  CHECK(lo.maps[i](lo.overlap(i, t)) < c.estimates[i]);
  CHECK(hi.maps[i](hi.overlap(i, t)) > c.estimates[i]);
  CHECK_THROWS_AS(systematic_bounds(ts, 1.05, 0.95), Error);
  CHECK_THROWS_AS(systematic_bounds(ts, 0.0, 1.05), Error);
  CHECK_THROWS_AS(systematic_bounds(ts, 0.95, 1.0), Error);
}

TEST_CASE("tes io") {
  const TemplateSet& ts = small_set();
  const TemplateSet back = template_set_from_json(to_json(ts));
  REQUIRE(back.size() == ts.size());
  CHECK(back.templates == ts.templates);
  CHECK(back.mu == ts.mu);
  CHECK(back.maps[2].overlaps == ts.maps[2].overlaps);
  CHECK(back.dt == ts.dt);
  nlohmann::json bad = to_json(ts);
  bad["format"] = "other";
  CHECK_THROWS_AS(template_set_from_json(bad), Error);

  TraceModel m;
  m.saturation_n = 33.0;
  const TraceModel m2 = trace_model_from_json(to_json(m));
  CHECK(m2.saturation_n == 33.0);
  CHECK(m2.samples == m.samples);

  const auto dir = std::filesystem::temp_directory_path() / "squeezelab_test_tes";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "traces.csv").string();
  std::vector<Trace> traces = {synth_trace(1.0, m, 1), synth_trace(2.0, m, 2), synth_trace(0.0, m, 3)};
  write_traces(path, traces, {{"seed", 1}});
  CHECK(std::filesystem::exists(path + ".json"));
  CHECK(read_traces(path) == traces);

  write_text(path, "0,1.0,2.0\n1,1.0\n");
  CHECK_THROWS_AS(read_traces(path), Error);
  write_text(path, "0,1.0,abc\n");
  CHECK_THROWS_AS(read_traces(path), Error);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_traces(path), Error);
}
