// squeezelab: command-line driver. Every command prints one JSON document on
// stdout; bulk data goes to files. Exit codes: 0 ok, 2 invalid input,
// 3 numerical failure or non-convergence, 4 I/O.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "squeezelab/channels.hpp"
#include "squeezelab/distributions.hpp"
#include "squeezelab/error.hpp"
#include "squeezelab/format.hpp"
#include "squeezelab/inference.hpp"
#include "squeezelab/jpnd_io.hpp"
#include "squeezelab/parallel.hpp"
#include "squeezelab/sampling.hpp"
#include "squeezelab/statistics.hpp"
#include "squeezelab/tes.hpp"

using nlohmann::json;
using namespace squeezelab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter:
    case ErrorKind::DimMismatch:
    case ErrorKind::InvalidData:
      return kExitValidation;
    case ErrorKind::Io:
      return kExitIo;
    default:
      return kExitNumerical;
  }
}

void emit(const json& doc) { std::cout << dump_json(doc, 2) << '\n'; }

int emit_error(std::string_view kind, const std::string& message, int code) {
  emit({{"error", {{"kind", std::string(kind)}, {"message", message}}}});
  return code;
}

// Statistic value or null when the estimator rejects the distribution.
json try_stat(const JointDist& j, const std::string& spec) {
  try {
    return make_statistic(spec).eval(j).front();
  } catch (const Error&) {
    return nullptr;
  }
}

json summary(const JointDist& j) {
  return {{"mean_s", try_stat(j, "mean:s")}, {"mean_i", try_stat(j, "mean:i")},
          {"g2_s", try_stat(j, "g2:s")},     {"g2_i", try_stat(j, "g2:i")},
          {"nrf", try_stat(j, "nrf")},       {"k_s", try_stat(j, "k:s")},
          {"k_i", try_stat(j, "k:i")},       {"dim_s", j.dim_s()},
          {"dim_i", j.dim_i()},              {"truncated_mass", j.truncated_mass()}};
}

Arm parse_arm(const std::string& s) {
  if (s == "s" || s == "signal") return Arm::Signal;
  if (s == "i" || s == "idler") return Arm::Idler;
  throw Error(ErrorKind::InvalidParameter, "arm must be s or i, got '" + s + "'");
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  ModelParams params;
  std::vector<double> eta{1.0, 1.0};
  std::vector<double> n_alpha{0.0, 0.0};
  std::vector<double> n_th{0.0, 0.0};
  std::string config;
  std::size_t dim = 0;
  double tail_tol = kDefaultTailTol;
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate(SimulateArgs a) {
  if (!a.config.empty()) {
    json doc;
    try {
      doc = json::parse(read_text(a.config));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidData, a.config + ": " + e.what());
    }
    a.params = params_from_json(doc);
  } else {
    a.params.eta_s = a.eta[0];
    a.params.eta_i = a.eta[1];
    a.params.n_alpha_s = a.n_alpha[0];
    a.params.n_alpha_i = a.n_alpha[1];
    a.params.n_th_s = a.n_th[0];
    a.params.n_th_i = a.n_th[1];
  }
  a.params.validate();
  require(a.tail_tol > 0.0 && a.tail_tol < 1.0, ErrorKind::InvalidParameter, "--tail-tol must lie in (0, 1)");
  const std::size_t dim = a.dim > 0 ? a.dim : choose_dim(a.params, a.tail_tol);
  JointDist state = apply_loss(compose_state(a.params, dim, a.tail_tol), a.params.eta_s, a.params.eta_i);
  if (a.events > 0) state = sample_counts(state, a.events, a.seed);
  if (!a.out.empty()) write_jpnd(a.out, state);
  json doc = {{"command", "simulate"}, {"params", to_json(a.params)}, {"summary", summary(state)}};
  if (a.events > 0) {
    doc["events"] = a.events;
    doc["seed"] = a.seed;
  }
  if (!a.out.empty()) doc["output"] = a.out;
  emit(doc);
  return kExitOk;
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string file;
  std::vector<int> g_surface;
  std::string g_surface_csv;
  int herald = -1;
  int herald_curve = 0;
  std::string herald_arm = "i";
  bool nrf = false;
  bool parity = false;
  int ncmatrix = 0;
  std::vector<std::string> stats;
  int mc = 0;
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
};

int run_analyze(const AnalyzeArgs& a) {
  const JointDist j = read_jpnd(a.file);
  const Arm harm = parse_arm(a.herald_arm);
  const std::string harm_tag = harm == Arm::Signal ? "s" : "i";
  std::vector<std::string> specs = {"mean:s", "mean:i", "g2:s", "g2:i"};
  if (a.nrf) specs.push_back("nrf");
  if (a.parity) {
    specs.push_back("parity:s");
    specs.push_back("parity:i");
  }
  if (a.herald >= 0) {
    specs.push_back("herald-g2:" + harm_tag + ":" + std::to_string(a.herald));
    if (a.parity) specs.push_back("herald-parity:" + harm_tag + ":" + std::to_string(a.herald));
  }
  if (a.ncmatrix > 0) specs.push_back("mineig:" + std::to_string(a.ncmatrix));
  for (const std::string& s : a.stats) specs.push_back(s);

  std::uint64_t mc_events = a.events;
  if (a.mc > 0 && mc_events == 0) {
    require(j.n_events().has_value(), ErrorKind::InvalidParameter,
            "--mc needs --events for a file without an event count");
    mc_events = *j.n_events();
  }

  json doc = {{"command", "analyze"}, {"file", a.file}};
  json stats = json::array();
  for (const std::string& spec : specs) {
    const Statistic st = make_statistic(spec);
    json entry = {{"statistic", spec}, {"value", st.eval(j).front()}};
    if (a.mc > 0) entry["std"] = mc_std(j, mc_events, a.mc, st, a.seed).std;
    stats.push_back(std::move(entry));
  }
  doc["statistics"] = std::move(stats);

  if (a.ncmatrix > 0) {
    const MomentMatrix mm = nonclassicality_matrix(j, a.ncmatrix);
    json basis = json::array();
    for (const auto& [p, q] : mm.basis) basis.push_back({p, q});
    json rows = json::array();
    for (std::size_t r = 0; r < mm.size(); ++r) {
      rows.push_back(std::vector<double>(mm.entries.begin() + static_cast<std::ptrdiff_t>(r * mm.size()),
                                         mm.entries.begin() + static_cast<std::ptrdiff_t>((r + 1) * mm.size())));
    }
    doc["moment_matrix"] = {{"order", mm.order}, {"basis", basis}, {"entries", rows},
                            {"min_eigenvalue", mm.min_eigenvalue}};
  }

  if (a.herald_curve > 0) {
    json curve = json::array();
    for (int h = 1; h <= a.herald_curve; ++h) {
      json point = {{"herald", h}};
      try {
        const Herald hd = herald(j, harm, static_cast<std::size_t>(h));
        point["probability"] = hd.probability;
        point["g2"] = g_n(hd.dist, 2);
        point["parity"] = parity(hd.dist);
      } catch (const Error& e) {
        point["error"] = std::string(to_string(e.kind()));
      }
      curve.push_back(std::move(point));
    }
    doc["herald_curve"] = {{"herald_arm", harm_tag}, {"points", curve}};
  }

  if (!a.g_surface.empty()) {
    require(a.g_surface.size() == 2 && a.g_surface[0] >= 1 && a.g_surface[1] >= 1, ErrorKind::InvalidParameter,
            "--g-surface needs two positive orders M N");
    const int m = a.g_surface[0], n = a.g_surface[1];
    const Statistic st = make_statistic("gsurface:" + std::to_string(m) + "," + std::to_string(n));
    const std::vector<double> g = st.eval(j);
    auto matrix = [&](const std::vector<double>& v) {
      json rows = json::array();
      for (int r = 0; r < m; ++r) {
        rows.push_back(std::vector<double>(v.begin() + r * n, v.begin() + (r + 1) * n));
      }
      return rows;
    };
    json surface = {{"max_m", m}, {"max_n", n}, {"values", matrix(g)}};
    std::vector<double> sd;
    if (a.mc > 0) {
      const auto reports = mc_std_all(j, mc_events, a.mc, st, a.seed);
      sd.resize(g.size());
      std::vector<double> rel(g.size());
      for (std::size_t c = 0; c < g.size(); ++c) {
        sd[c] = reports[c].std;
        rel[c] = reports[c].std / g[c];
      }
      surface["std"] = matrix(sd);
      surface["relative_error"] = matrix(rel);
      surface["failures"] = reports.empty() ? 0 : reports.front().failures;
    }
    if (!a.g_surface_csv.empty()) {
      std::string csv = sd.empty() ? "m,n,value\n" : "m,n,value,mc_std\n";
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) {
          const std::size_t k = static_cast<std::size_t>(r * n + c);
          csv += std::to_string(r + 1) + "," + std::to_string(c + 1) + "," + format_double(g[k]);
          if (!sd.empty()) csv += "," + format_double(sd[k]);
          csv += "\n";
        }
      write_text(a.g_surface_csv, csv);
      surface["csv"] = a.g_surface_csv;
    }
    doc["g_surface"] = std::move(surface);
  }
  if (a.mc > 0) doc["mc"] = {{"trials", a.mc}, {"n_events", mc_events}, {"seed", a.seed}};
  emit(doc);
  return kExitOk;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string file;
  std::string init = "auto";
  int multistarts = 16;
  std::uint64_t seed = 0;
  std::string out;
};

int run_fit(const FitArgs& a) {
  const JointDist j = read_jpnd(a.file);
  std::optional<ModelParams> init;
  if (a.init != "auto") {
    try {
      init = params_from_json(json::parse(read_text(a.init)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidData, a.init + ": " + e.what());
    }
  }
  FitOptions options;
  options.multistarts = a.multistarts;
  options.seed = a.seed;
  const FitResult r = fit_model(j, init, options);

  // Row order of the published parameter table.
  const ModelParams& p = r.params;
  json table = json::array({
      {{"parameter", "eta_s"}, {"value", p.eta_s}},
      {{"parameter", "eta_i"}, {"value", p.eta_i}},
      {{"parameter", "n_pdc"}, {"value", p.n_pdc}},
      {{"parameter", "K"}, {"value", p.k}},
      {{"parameter", "n_alpha_s"}, {"value", p.n_alpha_s}},
      {{"parameter", "n_alpha_i"}, {"value", p.n_alpha_i}},
      {{"parameter", "n_th_s"}, {"value", p.n_th_s}},
      {{"parameter", "n_th_i"}, {"value", p.n_th_i}},
  });
  json doc = {{"command", "fit"}, {"file", a.file}, {"result", to_json(r)}, {"table", table}};
  if (!a.out.empty()) {
    ModelParams pre = p;
    pre.eta_s = pre.eta_i = 1.0;
    write_jpnd(a.out, compose_state(pre, choose_dim(pre)));
    doc["output"] = a.out;
  }
  emit(doc);
  return r.converged ? kExitOk : kExitNumerical;
}

// ---- invert / klyshko / pump-fit -------------------------------------------

int run_invert(const std::string& file, const std::vector<double>& eta, std::size_t dim, const std::string& out) {
  const JointDist j = read_jpnd(file);
  const InversionResult r = invert_loss(j, eta[0], eta[1], dim);
  if (!out.empty()) write_jpnd(out, r.state);
  double off = 0.0;
  std::vector<double> diag(dim);
  for (std::size_t m = 0; m < dim; ++m) {
    for (std::size_t n = 0; n < dim; ++n) {
      if (m == n) {
        diag[m] = r.state(m, n);
      } else {
        off += r.state(m, n);
      }
    }
  }
  json doc = {{"command", "invert"}, {"file", file},         {"residual", r.residual},
              {"iterations", r.iterations}, {"diagonal", diag}, {"off_diagonal_mass", off}};
  if (!out.empty()) doc["output"] = out;
  emit(doc);
  return kExitOk;
}

int run_klyshko(const std::string& file) {
  const KlyshkoEstimate k = klyshko_efficiency(read_jpnd(file));
  emit({{"command", "klyshko"},
        {"file", file},
        {"eta_s", k.eta_s},
        {"eta_i", k.eta_i},
        {"model_violation", k.model_violation},
        {"warnings", k.warnings}});
  return kExitOk;
}

int run_pump_fit(const std::string& file) {
  std::istringstream in(read_text(file));
  std::vector<PumpPoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    PumpPoint p;
    char comma = 0;
    std::istringstream row(line);
    if (!(row >> p.power >> comma >> p.mean_photons) || comma != ',') {
      // Tolerate one header line.
      if (points.empty() && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      throw Error(ErrorKind::InvalidData, file + ": expected 'power,mean' rows");
    }
    points.push_back(p);
  }
  const double alpha = fit_pump_curve(points);
  json fitted = json::array();
  for (const PumpPoint& p : points) {
    const double s = std::sinh(alpha * std::sqrt(p.power));
    fitted.push_back({{"power", p.power}, {"measured", p.mean_photons}, {"model", s * s}});
  }
  emit({{"command", "pump-fit"}, {"file", file}, {"alpha", alpha}, {"points", fitted}});
  return kExitOk;
}

// ---- TES -------------------------------------------------------------------

TraceModel load_model(const std::string& path, const TraceModel& flags) {
  if (path.empty()) {
    flags.validate();
    return flags;
  }
  try {
    return trace_model_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidData, path + ": " + e.what());
  }
}

int run_tes_calibrate(const TraceModel& model, std::size_t traces, std::uint64_t seed, const std::string& out) {
  const std::vector<double> means = default_calibration_means();
  const auto runs = synth_calibration_runs(model, means, traces, seed);
  const TemplateSet ts = calibrate_templates(runs, model.dt);
  json doc = to_json(ts);
  doc["model"] = to_json(model);
  doc["seed"] = seed;
  doc["traces_per_run"] = traces;
  write_text(out, dump_json(doc, 2) + "\n");
  json list = json::array();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    list.push_back({{"mu", ts.mu[i]},
                    {"anchors", ts.maps[i].photons.size()},
                    {"window", {ts.window_lo(i), ts.window_hi(i)}}});
  }
  emit({{"command", "tes-calibrate"}, {"output", out}, {"seed", seed}, {"templates", list}});
  return kExitOk;
}

int run_tes_synth(const TraceModel& model, const std::vector<double>& photons, double poisson, std::size_t count,
                  std::uint64_t seed, const std::string& out) {
  std::vector<double> truth;
  if (!photons.empty()) {
    truth = photons;
  } else {
    require(poisson > 0.0 && count > 0, ErrorKind::InvalidParameter,
            "give --photons or --poisson with --count");
    truth.resize(count);
  }
  std::vector<Trace> traces(truth.size());
  parallel_for(truth.size(), [&](std::size_t t) {
    auto rng = stream_rng(seed, t);
    if (photons.empty()) truth[t] = static_cast<double>(std::poisson_distribution<long>(poisson)(rng));
    traces[t] = synth_trace(truth[t], model, rng);
  });
  const json sidecar = {{"dt", model.dt}, {"T", model.samples}, {"model", to_json(model)},
                        {"seed", seed},   {"photons", truth}};
  write_traces(out, traces, sidecar);
  emit({{"command", "tes-synth"}, {"output", out}, {"traces", traces.size()}, {"seed", seed}});
  return kExitOk;
}

int run_tes_classify(const std::string& templates, const std::string& file, double scale) {
  TemplateSet ts;
  try {
    ts = template_set_from_json(json::parse(read_text(templates)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidData, templates + ": " + e.what());
  }
  require(scale > 0.0, ErrorKind::InvalidParameter, "--scale must be positive");
  ts.scale *= scale;
  const std::vector<Trace> traces = read_traces(file);
  std::vector<json> rows(traces.size());
  parallel_for(traces.size(), [&](std::size_t t) {
    try {
      const Classification c = classify(traces[t], ts);
      rows[t] = {{"trace", t}, {"photons", c.photons}, {"template", c.template_index}};
    } catch (const OutOfRangeClassification& e) {
      rows[t] = {{"trace", t}, {"photons", nullptr}, {"out_of_range", true}, {"estimate", e.estimate()}};
    }
  });
  std::vector<std::uint64_t> histogram;
  std::uint64_t out_of_range = 0;
  for (const json& r : rows) {
    if (r["photons"].is_null()) {
      ++out_of_range;
      continue;
    }
    const auto n = r["photons"].get<std::size_t>();
    if (histogram.size() <= n) histogram.resize(n + 1, 0);
    ++histogram[n];
  }
  emit({{"command", "tes-classify"},
        {"file", file},
        {"scale", ts.scale},
        {"histogram", histogram},
        {"out_of_range", out_of_range},
        {"classifications", rows}});
  return kExitOk;
}

void add_model_flags(CLI::App* cmd, std::string& model_file, TraceModel& m) {
  cmd->add_option("--model", model_file, "Trace model JSON (overrides the flags below)");
  cmd->add_option("--rise-time", m.rise_time, "Pulse rise time [us]");
  cmd->add_option("--decay-time", m.decay_time, "Pulse decay time [us]");
  cmd->add_option("--amplitude-scale", m.amplitude_scale);
  cmd->add_option("--saturation-n", m.saturation_n);
  cmd->add_option("--noise-sigma", m.noise_sigma);
  cmd->add_option("--dt", m.dt, "Sample interval [us]");
  cmd->add_option("--samples", m.samples, "Samples per trace");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-number statistics of two-mode squeezed light"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Build the lossy model state, optionally sample counts");
  simulate->add_option("--config", sim.config, "Model parameters as JSON");
  simulate->add_option("--n-pdc", sim.params.n_pdc, "Mean PDC photons per arm");
  simulate->add_option("--k", sim.params.k, "Effective Schmidt mode number");
  simulate->add_option("--eta", sim.eta, "Signal and idler efficiencies")->expected(2);
  simulate->add_option("--n-alpha", sim.n_alpha, "Coherent background per arm")->expected(2);
  simulate->add_option("--n-th", sim.n_th, "Thermal background per arm")->expected(2);
  simulate->add_option("--dim", sim.dim, "Photon-number cutoff (default: from --tail-tol)");
  simulate->add_option("--tail-tol", sim.tail_tol, "Allowed mass outside the support");
  simulate->add_option("--events", sim.events, "Sample this many events into a histogram");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--out", sim.out, "jpnd-v1 output file");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Statistics of a jpnd-v1 file");
  analyze->add_option("file", an.file)->required();
  analyze->add_option("--g-surface", an.g_surface, "g(m,n) for m <= M, n <= N")->expected(2);
  analyze->add_option("--g-surface-csv", an.g_surface_csv, "Also write the surface as CSV m,n,value[,mc_std]");
  analyze->add_option("--herald", an.herald, "Herald photon number");
  analyze->add_option("--herald-curve", an.herald_curve, "Heralded g2 and parity for h = 1..H");
  analyze->add_option("--herald-arm", an.herald_arm, "Heralding arm, s or i (default i)");
  analyze->add_flag("--nrf", an.nrf);
  analyze->add_flag("--parity", an.parity);
  analyze->add_option("--ncmatrix", an.ncmatrix, "Moment-matrix order");
  analyze->add_option("--stat", an.stats, "Extra statistic, e.g. gn:s:3 or gmn:2,3");
  analyze->add_option("--mc", an.mc, "Monte-Carlo trials for standard deviations");
  analyze->add_option("--events", an.events, "Events per Monte-Carlo trial (default: file's count)");
  analyze->add_option("--seed", an.seed);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit the eight-parameter loss model to a histogram");
  fit->add_option("file", fa.file)->required();
  fit->add_option("--init", fa.init, "auto or a parameter JSON file");
  fit->add_option("--multistarts", fa.multistarts);
  fit->add_option("--seed", fa.seed);
  fit->add_option("--out", fa.out, "Write the fitted pre-loss state");

  std::string inv_file, inv_out;
  std::vector<double> inv_eta;
  std::size_t inv_dim = 0;
  auto* invert = app.add_subcommand("invert", "Undo binomial loss by constrained least squares");
  invert->add_option("file", inv_file)->required();
  invert->add_option("--eta", inv_eta)->expected(2)->required();
  invert->add_option("--dim", inv_dim)->required();
  invert->add_option("--out", inv_out);

  std::string kly_file;
  auto* klyshko = app.add_subcommand("klyshko", "Efficiencies from singles and covariance");
  klyshko->add_option("file", kly_file)->required();

  std::string pump_file;
  auto* pump = app.add_subcommand("pump-fit", "Fit <n> = sinh^2(alpha sqrt(P)) to power,mean rows");
  pump->add_option("file", pump_file)->required();

  std::string cal_model_file, cal_out;
  TraceModel cal_model;
  std::size_t cal_traces = kMinTracesPerRun;
  std::uint64_t cal_seed = 0;
  auto* tes_cal = app.add_subcommand("tes-calibrate", "Calibrate 20 templates on synthetic Poissonian runs");
  add_model_flags(tes_cal, cal_model_file, cal_model);
  tes_cal->add_option("--traces-per-run", cal_traces);
  tes_cal->add_option("--seed", cal_seed);
  tes_cal->add_option("--out", cal_out)->required();

  std::string syn_model_file, syn_out;
  TraceModel syn_model;
  std::vector<double> syn_photons;
  double syn_poisson = 0.0;
  std::size_t syn_count = 0;
  std::uint64_t syn_seed = 0;
  auto* tes_syn = app.add_subcommand("tes-synth", "Write synthetic traces as CSV with a JSON sidecar");
  add_model_flags(tes_syn, syn_model_file, syn_model);
  tes_syn->add_option("--photons", syn_photons, "Photon number of each trace");
  tes_syn->add_option("--poisson", syn_poisson, "Poissonian mean photon number");
  tes_syn->add_option("--count", syn_count);
  tes_syn->add_option("--seed", syn_seed);
  tes_syn->add_option("--out", syn_out)->required();

  std::string cls_templates, cls_file;
  double cls_scale = 1.0;
  auto* tes_cls = app.add_subcommand("tes-classify", "Photon numbers of traces by template overlap");
  tes_cls->add_option("file", cls_file)->required();
  tes_cls->add_option("--templates", cls_templates)->required();
  tes_cls->add_option("--scale", cls_scale, "Template rescaling for systematic bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("invalid-parameter", e.what(), kExitValidation);
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*analyze) return run_analyze(an);
    if (*fit) return run_fit(fa);
    if (*invert) return run_invert(inv_file, inv_eta, inv_dim, inv_out);
    if (*klyshko) return run_klyshko(kly_file);
    if (*pump) return run_pump_fit(pump_file);
    if (*tes_cal) return run_tes_calibrate(load_model(cal_model_file, cal_model), cal_traces, cal_seed, cal_out);
    if (*tes_syn) {
      return run_tes_synth(load_model(syn_model_file, syn_model), syn_photons, syn_poisson, syn_count, syn_seed,
                           syn_out);
    }
    if (*tes_cls) return run_tes_classify(cls_templates, cls_file, cls_scale);
  } catch (const Error& e) {
    return emit_error(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), kExitNumerical);
  }
  return kExitOk;
}
