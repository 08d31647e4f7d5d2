#include "qedet/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qedet/catalog.hpp"
#include "qedet/efficiency.hpp"
#include "qedet/format.hpp"
#include "qedet/montecarlo.hpp"
#include "qedet/statistics.hpp"
#include "qedet/tradespace.hpp"

namespace qedet::cli {

namespace {

using Json = nlohmann::ordered_json;

enum class OutputFormat { text, json };

/// A command's result: the report, and the exit status it implies.
struct Outcome {
  Json report;
  int code{0};
};

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// Text mode flattens the report into "path: value" lines. Numbers use the
// same 17-digit form as CSV, so every value parses back to the JSON one.
void render_text(std::ostream& out, const Json& j, const std::string& path) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      render_text(out, it.value(), path.empty() ? it.key() : path + "." + it.key());
    }
    return;
  }
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) render_text(out, j[i], path + "[" + std::to_string(i) + "]");
    return;
  }
  out << path << ": ";
  if (j.is_number_float()) {
    out << format_number(j.get<double>());
  } else if (j.is_string()) {
    out << j.get<std::string>();
  } else {
    out << j.dump();
  }
  out << '\n';
}

void emit(std::ostream& out, const Json& report, OutputFormat fmt) {
  if (fmt == OutputFormat::json) {
    out << report.dump(2) << '\n';
  } else {
    render_text(out, report, "");
  }
}

Json header(const std::string& command) {
  Json j;
  j["command"] = command;
  j["version"] = QEDET_VERSION;
  return j;
}

Json ratio_json(double ratio) {
  return Json{{"ratio", ratio}, {"db_amplitude", amplitude_ratio_db(ratio)}, {"db_power", power_ratio_db(ratio)}};
}

Json stats_json(const CountStatistics& s) {
  return Json{{"mean", s.mean},
              {"variance", s.variance},
              {"fano", opt(s.fano)},
              {"snr", opt(s.snr)},
              {"windows", s.windows},
              {"standard_error_of_fano", opt(s.standard_error_of_fano)}};
}

Json finding_json(const ValidationFinding& f) {
  return Json{{"severity", to_string(f.severity)}, {"subject", f.subject},   {"field", f.field},
              {"stated", opt(f.stated)},           {"recomputed", opt(f.recomputed)},
              {"tolerance", opt(f.tolerance)},     {"message", f.message}};
}

Json detector_json(const DetectorSpec& d) {
  return Json{{"technology", d.technology},
              {"bandwidth", d.bandwidth_hz},
              {"dark_count_rate", opt(d.dark_count_rate_hz)},
              {"operating_temp", d.operating_temp_k},
              {"quantum_efficiency", d.quantum_efficiency},
              {"excess_noise_factor", d.excess_noise_factor},
              {"dead_time", d.dead_time_s},
              {"mode", to_string(d.mode)},
              {"element_count", d.element_count},
              {"annotation", d.annotation}};
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

GainModel parse_gain(const std::string& spec) {
  if (spec == "none") return GainModel::none();
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const auto kind = spec.substr(0, colon);
    double g = 0.0;
    try {
      std::size_t used = 0;
      g = std::stod(spec.substr(colon + 1), &used);
      if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw CLI::ValidationError("--gain", "bad gain value in '" + spec + "'");
    }
    if (!(g > 0.0)) throw CLI::ValidationError("--gain", "gain must be > 0");
    if (kind == "det") return GainModel::deterministic(g);
    if (kind == "exp") return GainModel::exponential(g);
  }
  throw CLI::ValidationError("--gain", "expected none, det:G or exp:G, got '" + spec + "'");
}

const CLI::Range kFraction(0.0, 1.0);
const CLI::Range& kPositive = CLI::PositiveNumber;
const CLI::Range& kNonNegative = CLI::NonNegativeNumber;

// ---------------------------------------------------------------------------
// Stage efficiency flags shared by budget, sweep and checklist.

struct StageFlags {
  double eta_col{1};
  double eta_abs{1};
  double eta_pe{1};
  double eta_mul{1};
  int trap_n{1};
  std::string geometry{"retro"};

  void add(CLI::App* app, bool required) {
    auto* a = app->add_option("--eta-col", eta_col, "collection efficiency")->check(kFraction);
    auto* b = app->add_option("--eta-abs", eta_abs, "single-bounce absorption efficiency")->check(kFraction);
    auto* c = app->add_option("--eta-pe", eta_pe, "photo-electron conversion efficiency")->check(kFraction);
    if (required) {
      a->required();
      b->required();
      c->required();
    }
    app->add_option("--eta-mul", eta_mul, "multiplication efficiency")->check(kFraction)->capture_default_str();
    app->add_option("--trap-n", trap_n, "detectors in the light trap")->check(CLI::Range(1, 1 << 20))
        ->capture_default_str();
    app->add_option("--geometry", geometry, "trap geometry")->check(CLI::IsMember({"retro", "linear"}))
        ->capture_default_str();
  }

  StageEfficiencies<double> stages() const {
    return {eta_col, eta_abs, eta_pe, eta_mul, trap_n,
            geometry == "retro" ? TrapGeometryKind::retro : TrapGeometryKind::linear};
  }

  Json json() const {
    return Json{{"eta_col", eta_col}, {"eta_abs", eta_abs},   {"eta_pe", eta_pe},
                {"eta_mul", eta_mul}, {"trap_detectors", trap_n}, {"geometry", geometry}};
  }
};

// ---------------------------------------------------------------------------

struct BudgetArgs {
  StageFlags stages;
  std::optional<double> dark_rate, flux, count_rate, power, wavelength, dead_time;
  double margin{kDefaultRateMargin};
};

Outcome cmd_budget(const BudgetArgs& a) {
  Json r = header("budget");
  Json p = a.stages.json();
  const auto s = a.stages.stages();

  std::optional<double> flux = a.flux;
  if (!flux && a.power && a.wavelength) flux = photon_flux(*a.power, *a.wavelength);
  p["dark_rate"] = opt(a.dark_rate);
  p["photon_flux"] = opt(a.flux);
  p["power"] = opt(a.power);
  p["wavelength"] = opt(a.wavelength);
  p["count_rate"] = opt(a.count_rate);
  p["dead_time"] = opt(a.dead_time);
  p["margin"] = a.margin;
  r["parameters"] = p;

  const double eta = total_qe(s);
  r["eta_eff_abs"] = trap_absorption(s.eta_abs, s.trap_detectors, s.geometry);
  r["total_qe"] = eta;
  if (flux) r["photon_flux"] = *flux;
  if (a.dark_rate && flux) {
    const auto adj = dark_adjusted_qe(eta, RateBudget<double>{a.count_rate, a.dark_rate, 0.0, *flux});
    r["dark_adjusted_qe"] = adj.adjusted;
    r["dark_adjusted_qe_from_counts"] = opt(adj.from_counts);
    r["dark_limited"] = adj.adjusted < 0.0;
  }
  int code = 0;
  if (a.dark_rate && a.dead_time) {
    const auto b = rate_bracket(RateBudget<double>{a.count_rate, a.dark_rate, *a.dead_time, 0.0}, a.margin);
    r["rate_bracket"] = Json{{"feasible", b.feasible}, {"lower", b.lower}, {"upper", b.upper}, {"gap_ratio", b.gap_ratio}};
    if (!b.feasible) code = 1;
  }
  return {r, code};
}

struct SnrArgs {
  double eta{1};
  double n{1};
  double fano{1};
  std::optional<double> target;
};

Outcome cmd_snr(const SnrArgs& a) {
  Json r = header("snr");
  r["parameters"] = Json{{"eta", a.eta}, {"n", a.n}, {"fano", a.fano}, {"target_improvement", opt(a.target)}};
  const double classical = snr_classical(a.eta, a.n);
  r["classical"] = classical;
  Json improvement;
  if (a.eta < 1.0) {
    const auto c = snr_correlated(a.eta, a.n);
    r["correlated"] = Json{{"full", c.full}, {"approx", c.approx}, {"approx_valid", c.approx_valid}};
    improvement["correlated_approx_over_classical"] = ratio_json(c.approx / classical);
    improvement["correlated_full_over_classical"] = ratio_json(c.full / classical);
  } else {
    r["correlated"] = nullptr;
  }
  const auto f = snr_fano(a.eta, a.fano, a.n);
  r["fano"] = Json{{"full", f.full}, {"approx", f.approx}, {"regime", to_string(f.regime)},
                   {"regime_ratio", f.regime_ratio}};
  improvement["fano_approx_over_classical"] = ratio_json(f.approx / classical);
  improvement["fano_full_over_classical"] = ratio_json(f.full / classical);
  r["improvement"] = improvement;

  int code = 0;
  if (a.target) {
    const auto bound = squeezing_bound(*a.target, a.eta);
    r["squeezing_bound"] = Json{{"feasible", bound.has_value()},
                                {"max_fano", opt(bound)},
                                {"loss_term", (1.0 - a.eta) / a.eta},
                                {"target", ratio_json(*a.target)}};
    if (!bound) code = 1;
  }
  return {r, code};
}

struct SimulateArgs {
  std::string source{"poisson"};
  double n{100};
  double fano{1};
  double eta{1};
  double dark{0};
  double dead_time{0};
  std::string gain{"none"};
  std::int64_t windows{10000};
  std::uint64_t seed{0};
  int threads{0};
};

Outcome cmd_simulate(const SimulateArgs& a) {
  SimulationConfig c;
  if (a.source == "poisson") {
    c.source = SourceSpec::poisson(a.n);
  } else if (a.source == "deterministic") {
    c.source = SourceSpec::deterministic(a.n);
  } else {
    c.source = SourceSpec::with_fano(a.n, a.fano);
  }
  c.eta_effective = a.eta;
  c.dark_rate_per_window = a.dark;
  c.dead_time_windows = a.dead_time;
  c.gain = parse_gain(a.gain);
  c.windows = a.windows;
  c.seed = a.seed;
  c.threads = a.threads;

  Json r = header("simulate");
  r["parameters"] = Json{{"source", a.source},       {"n", a.n},     {"fano", c.source.fano},
                         {"eta", a.eta},             {"dark", a.dark}, {"dead_time", a.dead_time},
                         {"gain", a.gain},           {"windows", a.windows}, {"seed", a.seed}};

  const auto res = run(c);
  const auto pred = predict(c);
  r["counts"] = stats_json(res.counts);
  r["charge"] = stats_json(res.charge);
  r["empirical_enf"] = opt(res.empirical_enf);
  r["gain_draws"] = res.gain_draws;

  Json p{{"mean", pred.mean},
         {"variance", pred.variance},
         {"fano", pred.fano},
         {"snr", pred.variance > 0.0 ? Json(pred.mean / std::sqrt(pred.variance)) : Json(nullptr)},
         {"applies", pred.applies}};
  const double w = double(c.windows);
  p["mean_deviation_se"] =
      pred.variance > 0.0 ? Json((res.counts.mean - pred.mean) / std::sqrt(pred.variance / w)) : Json(nullptr);
  p["fano_deviation_se"] = res.counts.fano && res.counts.standard_error_of_fano
                               ? Json((*res.counts.fano - pred.fano) / *res.counts.standard_error_of_fano)
                               : Json(nullptr);
  r["prediction"] = p;

  // Closed-form SNR expressions at the configured efficiency, for comparison.
  Json closed;
  const double f_src = c.source.fano;
  if (a.eta > 0.0) {
    closed["snr_classical"] = snr_classical(a.eta, a.n);
    const auto fs = snr_fano(a.eta, f_src, a.n);
    closed["snr_fano_full"] = fs.full;
    closed["snr_fano_approx"] = fs.approx;
    if (a.eta < 1.0 && a.source == "deterministic") {
      const auto cs = snr_correlated(a.eta, a.n);
      closed["snr_correlated_full"] = cs.full;
      closed["snr_correlated_approx"] = cs.approx;
    }
  }
  r["closed_form"] = closed;
  return {r, 0};
}

struct SweepArgs {
  std::string spec_file;
  std::string variable;
  std::vector<double> grid;
  std::vector<std::string> metrics;
  StageFlags stages;
  double fano{1};
  double n{1e6};
  std::optional<double> dark_rate, dead_time, flux;
  double margin{kDefaultRateMargin};
  int n_elements{1};
  double alpha{0};
  int threads{0};
};

SweepSpec sweep_spec_from(const SweepArgs& a) {
  if (!a.spec_file.empty()) {
    std::ifstream in(a.spec_file);
    if (!in) throw std::runtime_error("cannot open sweep spec '" + a.spec_file + "'");
    return read_sweep_spec(in);
  }
  if (a.variable.empty() || a.grid.empty() || a.metrics.empty()) {
    throw CLI::ValidationError("sweep", "give --spec FILE or all of --variable, --grid and --metrics");
  }
  SweepSpec s;
  try {
    s.variable = sweep_variable_from_string(a.variable);
    for (const auto& m : a.metrics) s.outputs.push_back(sweep_metric_from_string(m));
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("sweep", e.what());
  }
  s.grid = a.grid;
  s.fixed.stages = a.stages.stages();
  s.fixed.fano = a.fano;
  s.fixed.photons = a.n;
  s.fixed.dark_rate = a.dark_rate;
  s.fixed.dead_time = a.dead_time;
  s.fixed.photon_flux = a.flux;
  s.fixed.margin = a.margin;
  s.fixed.n_elements = a.n_elements;
  s.fixed.alpha = a.alpha;
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw CLI::ValidationError("sweep", e.what());
  }
  return s;
}

struct ConfidenceArgs {
  int n_elements{1};
  double eta{1};
  double alpha{0};
};

Outcome cmd_confidence(const ConfidenceArgs& a) {
  Json r = header("confidence");
  r["parameters"] = Json{{"n_elements", a.n_elements}, {"eta", a.eta}, {"alpha", a.alpha}};
  r["delta"] = a.alpha * a.alpha / 2.0;
  r["confidence"] = confidence(ConfidenceInputs<double>{a.n_elements, a.eta, a.alpha});
  return {r, 0};
}

struct TrapArgs {
  double eta_abs{0};
  std::optional<int> n;
  std::optional<double> target;
  std::vector<double> paths;
  std::string geometry{"retro"};
  double speed{kSpeedOfLight};
};

Outcome cmd_trap(const TrapArgs& a) {
  const auto geom = a.geometry == "retro" ? TrapGeometryKind::retro : TrapGeometryKind::linear;
  std::optional<int> n = a.n;
  if (!n && !a.paths.empty()) n = int(a.paths.size());

  Json r = header("trap");
  r["parameters"] = Json{{"eta_abs", a.eta_abs}, {"n", n ? Json(*n) : Json(nullptr)}, {"target", opt(a.target)},
                         {"paths", a.paths},     {"geometry", a.geometry},             {"speed", a.speed}};
  int code = 0;
  if (n) {
    r["encounters"] = trap_encounters(*n, geom);
    r["eta_eff_abs"] = trap_absorption(a.eta_abs, *n, geom);
  }
  if (a.target) {
    const auto m = min_trap_detectors(a.eta_abs, *a.target, geom);
    r["min_trap_detectors"] = m ? Json(*m) : Json(nullptr);
    if (m) {
      r["min_trap_eta_eff_abs"] = trap_absorption(a.eta_abs, *m, geom);
    } else {
      code = 1;
    }
  }
  if (!a.paths.empty()) {
    r["delays"] = delay_lines(TrapGeometry{int(a.paths.size()), a.paths, geom}, a.speed);
  }
  return {r, code};
}

struct ChecklistArgs {
  std::string detector;
  std::string specs;
  StageFlags stages;
  std::optional<double> count_rate, flux, dark_rate, dead_time;
  double margin{kDefaultRateMargin};
};

Outcome cmd_checklist(const ChecklistArgs& a) {
  std::optional<DetectorSpec> det;
  if (!a.specs.empty()) {
    for (const auto& d : load_specs_file(a.specs).detectors) {
      if (d.technology == a.detector) det = d;
    }
  } else {
    det = find_builtin_detector(a.detector);
  }
  if (!det) throw std::runtime_error("no detector named '" + a.detector + "'");

  RateBudget<double> op{a.count_rate, a.dark_rate, a.dead_time.value_or(0.0), a.flux.value_or(0.0)};
  const auto rep = checklist(*det, a.stages.stages(), op, a.margin);

  Json r = header("checklist");
  Json p = a.stages.json();
  p["detector"] = detector_json(*det);
  p["count_rate"] = opt(a.count_rate);
  p["photon_flux"] = opt(a.flux);
  p["dark_rate"] = opt(a.dark_rate);
  p["dead_time"] = opt(a.dead_time);
  p["margin"] = a.margin;
  r["parameters"] = p;
  Json items = Json::array();
  for (const auto& i : rep.items) {
    items.push_back(Json{{"id", i.id},
                         {"name", i.name},
                         {"status", to_string(i.status)},
                         {"measured", opt(i.measured)},
                         {"threshold", opt(i.threshold)},
                         {"detail", i.detail}});
  }
  r["items"] = items;
  r["recommendations"] = rep.recommendations;
  r["all_pass"] = rep.all_pass();
  return {r, rep.all_pass() ? 0 : 1};
}

struct ValidateArgs {
  std::string specs;
  std::string spec_format;
};

Outcome cmd_validate(const ValidateArgs& a) {
  Json r = header("validate");
  r["parameters"] = Json{{"specs", a.specs.empty() ? Json(nullptr) : Json(a.specs)}};

  auto check_materials = [](const std::vector<MaterialSpec>& ms) {
    Json out = Json::array();
    for (const auto& m : ms) {
      Json f = Json::array();
      for (const auto& x : validate_material(m)) f.push_back(finding_json(x));
      out.push_back(Json{{"name", m.name},
                         {"fresnel_reflectivity", fresnel_normal_reflectivity(m.refractive_index)},
                         {"arctan_brewster_deg", brewster_angle_deg(m.refractive_index)},
                         {"findings", f}});
    }
    return out;
  };
  auto check_detectors = [](const std::vector<DetectorSpec>& ds) {
    Json out = Json::array();
    for (const auto& d : ds) {
      std::string status = "ok";
      try {
        check_invariants(d);
      } catch (const InvariantError& e) {
        status = e.what();
      }
      out.push_back(Json{{"technology", d.technology}, {"invariants", status}});
    }
    return out;
  };

  r["builtin"] = Json{{"materials", check_materials(builtin_materials())},
                      {"detectors", check_detectors(builtin_detectors())},
                      {"notes", builtin_detector_notes()}};
  if (!a.specs.empty()) {
    SpecSet set;
    if (a.spec_format.empty()) {
      set = load_specs_file(a.specs);
    } else {
      std::ifstream in(a.specs);
      if (!in) throw std::runtime_error("cannot open spec file '" + a.specs + "'");
      set = load_specs(in, spec_format_from_string(a.spec_format));
    }
    Json warnings = Json::array();
    for (const auto& f : set.findings) warnings.push_back(finding_json(f));
    r["loaded"] = Json{{"materials", check_materials(set.materials)},
                       {"detectors", check_detectors(set.detectors)},
                       {"warnings", warnings}};
  }
  return {r, 0};
}

struct NoiseArgs {
  double shot{0}, dark{0}, stray{0}, other{0};
};

Outcome cmd_noise(const NoiseArgs& a) {
  Json r = header("noise");
  r["parameters"] = Json{{"shot", a.shot}, {"dark", a.dark}, {"stray", a.stray}, {"other", a.other}};
  const auto b = noise_budget(a.shot, a.dark, a.stray, a.other);
  r["total_variance"] = b.total;
  r["shot_limited"] = b.shot_limited;
  return {r, 0};
}

struct EnfArgs {
  double mean{1}, mean_square{1};
};

Outcome cmd_enf(const EnfArgs& a) {
  Json r = header("enf");
  r["parameters"] = Json{{"mean_gain", a.mean}, {"mean_square_gain", a.mean_square}};
  r["excess_noise_factor"] = excess_noise_factor(a.mean, a.mean_square);
  return {r, 0};
}

void write_manifest(const std::string& path, const std::string& command, const Json& parameters,
                    const std::optional<std::uint64_t>& seed) {
  Json m;
  m["command"] = command;
  m["parameters"] = parameters;
  m["seed"] = seed ? Json(*seed) : Json(nullptr);
  m["version"] = QEDET_VERSION;
  m["timestamp"] = iso_timestamp();
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest '" + path + "'");
  f << m.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photon detection chain calculator and simulator", "qedet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(QEDET_VERSION));

  std::string format = "text";
  std::string manifest;
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  app.add_option("--manifest", manifest, "write a run manifest (parameters, seed, version, timestamp) to FILE");

  BudgetArgs budget;
  auto* budget_cmd = app.add_subcommand("budget", "quantum-efficiency budget of the detection chain");
  budget.stages.add(budget_cmd, true);
  budget_cmd->add_option("--dark-rate", budget.dark_rate, "dark count rate [Hz]")->check(kNonNegative);
  budget_cmd->add_option("--flux", budget.flux, "photon flux [1/s]")->check(kPositive);
  budget_cmd->add_option("--count-rate", budget.count_rate, "measured count rate [Hz]")->check(kNonNegative);
  budget_cmd->add_option("--power", budget.power, "incident optical power [W]")->check(kNonNegative);
  budget_cmd->add_option("--wavelength", budget.wavelength, "wavelength [m]")->check(kPositive);
  budget_cmd->add_option("--dead-time", budget.dead_time, "dead time [s]")->check(kPositive);
  budget_cmd->add_option("--margin", budget.margin, "rate bracket margin")->check(CLI::Range(1.0, 1e300))
      ->capture_default_str();

  SnrArgs snr;
  auto* snr_cmd = app.add_subcommand("snr", "signal-to-noise of classical, correlated and squeezed light");
  snr_cmd->add_option("--eta", snr.eta, "detection efficiency")->required()->check(kFraction);
  snr_cmd->add_option("--n", snr.n, "mean photon number per observation")->required()->check(kPositive);
  snr_cmd->add_option("--fano", snr.fano, "source Fano factor")->check(kPositive)->capture_default_str();
  snr_cmd->add_option("--target-improvement", snr.target, "amplitude SNR gain for the squeezing bound")
      ->check(kPositive);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo simulation of the detection chain");
  sim_cmd->add_option("--source", sim.source, "source statistics")
      ->check(CLI::IsMember({"poisson", "fano", "deterministic"}))
      ->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "mean photons per window")->check(kPositive)->capture_default_str();
  sim_cmd->add_option("--fano", sim.fano, "Fano factor (fano source)")->check(kPositive)->capture_default_str();
  sim_cmd->add_option("--eta", sim.eta, "end-to-end detection efficiency")->check(kFraction)->capture_default_str();
  sim_cmd->add_option("--dark", sim.dark, "mean dark counts per window")->check(kNonNegative)->capture_default_str();
  sim_cmd->add_option("--dead-time", sim.dead_time, "dead time as a fraction of the window")
      ->check(kNonNegative)
      ->capture_default_str();
  sim_cmd->add_option("--gain", sim.gain, "gain model: none, det:G or exp:G")->capture_default_str();
  sim_cmd->add_option("--windows", sim.windows, "number of windows")->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40))
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "worker threads (default: QEDET_THREADS or all cores)")
      ->check(kNonNegative);

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep, CSV output");
  sweep_cmd->add_option("--spec", sw.spec_file, "JSON sweep spec file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--variable", sw.variable, "swept parameter");
  sweep_cmd->add_option("--grid", sw.grid, "grid values")->delimiter(',');
  sweep_cmd->add_option("--metrics", sw.metrics, "metrics to report")->delimiter(',');
  sw.stages.add(sweep_cmd, false);
  sweep_cmd->add_option("--fano", sw.fano, "source Fano factor")->check(kPositive)->capture_default_str();
  sweep_cmd->add_option("--n", sw.n, "mean photons per observation")->check(kPositive)->capture_default_str();
  sweep_cmd->add_option("--dark-rate", sw.dark_rate, "dark count rate [Hz]")->check(kNonNegative);
  sweep_cmd->add_option("--dead-time", sw.dead_time, "dead time [s]")->check(kPositive);
  sweep_cmd->add_option("--flux", sw.flux, "photon flux [1/s]")->check(kPositive);
  sweep_cmd->add_option("--margin", sw.margin, "rate bracket margin")->capture_default_str();
  sweep_cmd->add_option("--n-elements", sw.n_elements, "detector elements")->check(CLI::Range(1, 1 << 30));
  sweep_cmd->add_option("--alpha", sw.alpha, "mean photon amplitude for confidence")->check(kNonNegative);
  sweep_cmd->add_option("--threads", sw.threads, "worker threads")->check(kNonNegative);

  ConfidenceArgs conf;
  auto* conf_cmd = app.add_subcommand("confidence", "segmented-detector confidence for entangled photons");
  conf_cmd->add_option("--n-elements", conf.n_elements, "detector elements")->required()->check(CLI::Range(1, 1 << 30));
  conf_cmd->add_option("--eta", conf.eta, "detection efficiency")->required()->check(kFraction);
  conf_cmd->add_option("--alpha", conf.alpha, "mean photon amplitude")->required()->check(kNonNegative);

  TrapArgs trap;
  auto* trap_cmd = app.add_subcommand("trap", "light-trap absorption, sizing and delay lines");
  trap_cmd->add_option("--eta-abs", trap.eta_abs, "single-bounce absorption")->required()->check(kFraction);
  trap_cmd->add_option("--n", trap.n, "detectors in the trap")->check(CLI::Range(1, 1 << 20));
  trap_cmd->add_option("--target", trap.target, "target effective absorption")->check(CLI::Range(0.0, 1.0));
  trap_cmd->add_option("--paths", trap.paths, "optical path to each detector [m]")->delimiter(',');
  trap_cmd->add_option("--geometry", trap.geometry, "trap geometry")->check(CLI::IsMember({"retro", "linear"}))
      ->capture_default_str();
  trap_cmd->add_option("--speed", trap.speed, "signal propagation speed [m/s]")->check(kPositive)
      ->capture_default_str();

  ChecklistArgs chk;
  auto* chk_cmd = app.add_subcommand("checklist", "five-point design review of a detection system");
  chk_cmd->add_option("--detector", chk.detector, "detector technology")->required();
  chk_cmd->add_option("--specs", chk.specs, "spec file with custom detectors")->check(CLI::ExistingFile);
  chk.stages.add(chk_cmd, false);
  chk_cmd->add_option("--count-rate", chk.count_rate, "operating count rate [Hz]")->check(kNonNegative);
  chk_cmd->add_option("--flux", chk.flux, "photon flux [1/s]")->check(kNonNegative);
  chk_cmd->add_option("--dark-rate", chk.dark_rate, "override dark count rate [Hz]")->check(kNonNegative);
  chk_cmd->add_option("--dead-time", chk.dead_time, "override dead time [s]")->check(kPositive);
  chk_cmd->add_option("--margin", chk.margin, "rate bracket margin")->check(CLI::Range(1.0, 1e300))
      ->capture_default_str();

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "consistency check of material and detector tables");
  val_cmd->add_option("--specs", val.specs, "JSON or CSV spec file")->check(CLI::ExistingFile);
  val_cmd->add_option("--spec-format", val.spec_format, "override format detection")
      ->check(CLI::IsMember({"json", "csv"}));

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise", "total noise variance and shot-noise-limited check");
  noise_cmd->add_option("--shot", noise.shot, "shot-noise variance")->required()->check(kNonNegative);
  noise_cmd->add_option("--dark", noise.dark, "dark-count variance")->check(kNonNegative);
  noise_cmd->add_option("--stray", noise.stray, "stray-light variance")->check(kNonNegative);
  noise_cmd->add_option("--other", noise.other, "other variance")->check(kNonNegative);

  EnfArgs enf;
  auto* enf_cmd = app.add_subcommand("enf", "excess noise factor from gain moments");
  enf_cmd->add_option("--mean-gain", enf.mean, "<M>")->required()->check(kPositive);
  enf_cmd->add_option("--mean-square-gain", enf.mean_square, "<M^2>")->required()->check(kPositive);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  const auto fmt = format == "json" ? OutputFormat::json : OutputFormat::text;
  try {
    Outcome outcome;
    std::optional<std::uint64_t> seed;
    std::string command;
    if (budget_cmd->parsed()) {
      outcome = cmd_budget(budget);
    } else if (snr_cmd->parsed()) {
      outcome = cmd_snr(snr);
    } else if (sim_cmd->parsed()) {
      outcome = cmd_simulate(sim);
      seed = sim.seed;
    } else if (sweep_cmd->parsed()) {
      const auto spec = sweep_spec_from(sw);
      const auto table = sweep(spec, resolve_thread_count(sw.threads));
      write_sweep_csv(out, table);
      if (!manifest.empty()) {
        std::ostringstream s;
        write_sweep_spec(s, spec);
        write_manifest(manifest, "sweep", Json::parse(s.str()), std::nullopt);
      }
      return 0;
    } else if (conf_cmd->parsed()) {
      outcome = cmd_confidence(conf);
    } else if (trap_cmd->parsed()) {
      if (!trap.n && !trap.target && trap.paths.empty()) {
        throw CLI::ValidationError("trap", "give at least one of --n, --target or --paths");
      }
      outcome = cmd_trap(trap);
    } else if (chk_cmd->parsed()) {
      outcome = cmd_checklist(chk);
    } else if (val_cmd->parsed()) {
      outcome = cmd_validate(val);
    } else if (noise_cmd->parsed()) {
      outcome = cmd_noise(noise);
    } else if (enf_cmd->parsed()) {
      outcome = cmd_enf(enf);
    }
    emit(out, outcome.report, fmt);
    if (!manifest.empty()) {
      write_manifest(manifest, outcome.report.value("command", std::string{}), outcome.report["parameters"], seed);
    }
    return outcome.code;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace qedet::cli
