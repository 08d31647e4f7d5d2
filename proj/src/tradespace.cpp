#include "qedet/tradespace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>

#include "qedet/format.hpp"
#include "qedet/statistics.hpp"

namespace qedet {

namespace {

constexpr std::array<std::pair<SweepVariable, const char*>, 9> kVariables{{
    {SweepVariable::eta_col, "eta_col"},
    {SweepVariable::eta_abs, "eta_abs"},
    {SweepVariable::eta_pe, "eta_pe"},
    {SweepVariable::eta_mul, "eta_mul"},
    {SweepVariable::fano, "fano"},
    {SweepVariable::photons, "photons"},
    {SweepVariable::trap_detectors, "trap_detectors"},
    {SweepVariable::dark_rate, "dark_rate"},
    {SweepVariable::dead_time, "dead_time"},
}};

constexpr std::array<std::pair<SweepMetric, const char*>, 12> kMetrics{{
    {SweepMetric::total_qe, "total_qe"},
    {SweepMetric::eta_eff_abs, "eta_eff_abs"},
    {SweepMetric::snr_classical, "snr_classical"},
    {SweepMetric::snr_correlated_full, "snr_correlated_full"},
    {SweepMetric::snr_correlated_approx, "snr_correlated_approx"},
    {SweepMetric::correlated_improvement, "correlated_improvement"},
    {SweepMetric::snr_fano_full, "snr_fano_full"},
    {SweepMetric::snr_fano_approx, "snr_fano_approx"},
    {SweepMetric::fano_improvement, "fano_improvement"},
    {SweepMetric::dark_adjusted_qe, "dark_adjusted_qe"},
    {SweepMetric::confidence, "confidence"},
    {SweepMetric::rate_bracket_feasible, "rate_bracket_feasible"},
}};

template <typename Table, typename Key>
const char* name_of(const Table& table, Key k) {
  for (const auto& [key, name] : table) {
    if (key == k) return name;
  }
  return "?";
}

template <typename Key, typename Table>
Key parse_name(const Table& table, std::string_view s, const char* what) {
  for (const auto& [key, name] : table) {
    if (s == name) return key;
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

int as_detector_count(double v) {
  if (!(v >= 1.0) || v != std::floor(v) || v > double(std::numeric_limits<int>::max())) {
    throw std::domain_error("trap_detectors must be a positive integer, got " + format_number(v));
  }
  return static_cast<int>(v);
}

}  // namespace

const char* to_string(SweepVariable v) { return name_of(kVariables, v); }
const char* to_string(SweepMetric m) { return name_of(kMetrics, m); }
SweepVariable sweep_variable_from_string(std::string_view s) {
  return parse_name<SweepVariable>(kVariables, s, "sweep variable");
}
SweepMetric sweep_metric_from_string(std::string_view s) {
  return parse_name<SweepMetric>(kMetrics, s, "sweep metric");
}

void validate(const SweepSpec& s) {
  if (s.grid.empty()) throw std::invalid_argument("sweep grid is empty");
  if (s.outputs.empty()) throw std::invalid_argument("sweep requests no metrics");
  if (s.grid.size() > 1) {
    const bool up = s.grid[1] > s.grid[0];
    for (std::size_t i = 1; i < s.grid.size(); ++i) {
      const bool ok = up ? s.grid[i] > s.grid[i - 1] : s.grid[i] < s.grid[i - 1];
      if (!ok) throw std::invalid_argument("sweep grid must be strictly monotone");
    }
  }
  const bool dark = s.fixed.dark_rate.has_value() || s.variable == SweepVariable::dark_rate;
  const bool dead = s.fixed.dead_time.has_value() || s.variable == SweepVariable::dead_time;
  for (auto m : s.outputs) {
    if (m == SweepMetric::dark_adjusted_qe && !(dark && s.fixed.photon_flux)) {
      throw std::invalid_argument("metric dark_adjusted_qe needs dark_rate and photon_flux");
    }
    if (m == SweepMetric::rate_bracket_feasible && !(dark && dead)) {
      throw std::invalid_argument("metric rate_bracket_feasible needs dark_rate and dead_time");
    }
  }
}

SweepContext with_value(SweepContext ctx, SweepVariable v, double value) {
  switch (v) {
    case SweepVariable::eta_col: ctx.stages.eta_col = value; break;
    case SweepVariable::eta_abs: ctx.stages.eta_abs = value; break;
    case SweepVariable::eta_pe: ctx.stages.eta_pe = value; break;
    case SweepVariable::eta_mul: ctx.stages.eta_mul = value; break;
    case SweepVariable::fano: ctx.fano = value; break;
    case SweepVariable::photons: ctx.photons = value; break;
    case SweepVariable::trap_detectors: ctx.stages.trap_detectors = as_detector_count(value); break;
    case SweepVariable::dark_rate: ctx.dark_rate = value; break;
    case SweepVariable::dead_time: ctx.dead_time = value; break;
  }
  return ctx;
}

double evaluate_metric(const SweepContext& ctx, SweepMetric m) {
  if (m == SweepMetric::eta_eff_abs) {
    return trap_absorption(ctx.stages.eta_abs, ctx.stages.trap_detectors, ctx.stages.geometry);
  }
  if (m == SweepMetric::rate_bracket_feasible) {
    if (!ctx.dead_time) throw std::domain_error("dead_time not set");
    RateBudget<double> b{std::nullopt, ctx.dark_rate, *ctx.dead_time, 0.0};
    return rate_bracket(b, ctx.margin).feasible ? 1.0 : 0.0;
  }
  const double eta = total_qe(ctx.stages);
  switch (m) {
    case SweepMetric::total_qe: return eta;
    case SweepMetric::snr_classical: return snr_classical(eta, ctx.photons);
    case SweepMetric::snr_correlated_full: return snr_correlated(eta, ctx.photons).full;
    case SweepMetric::snr_correlated_approx: return snr_correlated(eta, ctx.photons).approx;
    case SweepMetric::correlated_improvement:
      return snr_correlated(eta, ctx.photons).approx / snr_classical(eta, ctx.photons);
    case SweepMetric::snr_fano_full: return snr_fano(eta, ctx.fano, ctx.photons).full;
    case SweepMetric::snr_fano_approx: return snr_fano(eta, ctx.fano, ctx.photons).approx;
    case SweepMetric::fano_improvement:
      return snr_fano(eta, ctx.fano, ctx.photons).approx / snr_classical(eta, ctx.photons);
    case SweepMetric::dark_adjusted_qe: {
      if (!ctx.photon_flux) throw std::domain_error("photon_flux not set");
      RateBudget<double> b{std::nullopt, ctx.dark_rate, 0.0, *ctx.photon_flux};
      return dark_adjusted_qe(eta, b).adjusted;
    }
    case SweepMetric::confidence: return confidence(ConfidenceInputs<double>{ctx.n_elements, eta, ctx.alpha});
    default: break;
  }
  throw std::logic_error("unhandled metric");
}

SweepTable sweep(const SweepSpec& s, int threads) {
  validate(s);
  SweepTable table{s.variable, s.outputs, std::vector<SweepRow>(s.grid.size())};

  auto eval_row = [&](std::size_t i) {
    SweepRow row{s.grid[i], std::vector<std::optional<double>>(s.outputs.size()), {}};
    std::vector<std::string> errors;
    std::optional<SweepContext> ctx;
    try {
      ctx = with_value(s.fixed, s.variable, s.grid[i]);
    } catch (const std::exception& e) {
      errors.emplace_back(e.what());
    }
    if (ctx) {
      for (std::size_t k = 0; k < s.outputs.size(); ++k) {
        try {
          row.metrics[k] = evaluate_metric(*ctx, s.outputs[k]);
        } catch (const std::exception& e) {
          errors.push_back(std::string(to_string(s.outputs[k])) + ": " + e.what());
        }
      }
    }
    row.error = join(errors, "; ");
    table.rows[i] = std::move(row);
  };

  const std::size_t n = s.grid.size();
  const std::size_t workers = std::clamp<std::size_t>(std::size_t(std::max(threads, 1)), 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) eval_row(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) eval_row(i);
      });
    }
  }
  return table;
}

std::optional<int> min_trap_detectors(double eta_abs, double target, TrapGeometryKind geometry) {
  if (!(eta_abs >= 0.0 && eta_abs < 1.0)) throw std::domain_error("eta_abs must lie in [0, 1)");
  if (!(target > 0.0 && target < 1.0)) throw std::domain_error("target must lie in (0, 1)");
  if (eta_abs == 0.0) return std::nullopt;
  if (eta_abs >= target) return 1;
  // (1 - eta)^encounters <= 1 - target  =>  encounters >= log(1 - target) / log(1 - eta)
  const double encounters = std::log1p(-target) / std::log1p(-eta_abs);
  int n = geometry == TrapGeometryKind::retro ? int(std::ceil((encounters + 1.0) / 2.0)) : int(std::ceil(encounters));
  n = std::max(n, 1);
  // The logarithm can land a hair on either side of an integer boundary.
  while (n > 1 && trap_absorption(eta_abs, n - 1, geometry) >= target) --n;
  while (trap_absorption(eta_abs, n, geometry) < target) ++n;
  return n;
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::info: return "info";
  }
  return "?";
}

bool ChecklistReport::all_pass() const {
  return std::none_of(items.begin(), items.end(), [](const auto& i) { return i.status == CheckStatus::fail; });
}

ChecklistReport checklist(const DetectorSpec& detector, const StageEfficiencies<double>& stages,
                          const RateBudget<double>& operating, double margin) {
  check_invariants(detector);
  validate(stages);
  const auto dark_opt = operating.dark_rate ? operating.dark_rate : detector.dark_count_rate_hz;
  if (!dark_opt) {
    throw std::domain_error(detector.technology + ": dark count rate is unknown; supply one explicitly");
  }
  const double dark = *dark_opt;
  const double dead = operating.dead_time > 0.0 ? operating.dead_time : detector.dead_time_s;
  const double eta = total_qe(stages);
  const double count_rate = operating.count_rate.value_or(eta * operating.photon_flux + dark);

  ChecklistReport r;
  auto status = [](bool ok) { return ok ? CheckStatus::pass : CheckStatus::fail; };

  const double ratio = dark > 0.0 ? count_rate / dark : std::numeric_limits<double>::infinity();
  r.items.push_back({1, "signal-to-dark count ratio", status(ratio > kSignalToDarkRatio), ratio, kSignalToDarkRatio,
                     "N_c = " + format_number(count_rate) + " Hz, N_d = " + format_number(dark) + " Hz"});

  const auto bracket = rate_bracket(RateBudget<double>{std::nullopt, dark, dead, 0.0}, margin);
  const bool inside = count_rate >= bracket.lower && count_rate <= bracket.upper;
  r.items.push_back({2, "count-rate bracket", status(bracket.feasible), bracket.gap_ratio, 1.0,
                     "[" + format_number(bracket.lower) + ", " + format_number(bracket.upper) + "] Hz at margin " +
                         format_number(margin) + (inside ? "; count rate inside" : "; count rate outside")});

  const double loss = 1.0 - stages.eta_col;
  r.items.push_back({3, "collection loss", status(loss < kCollectionLossLimit), loss, kCollectionLossLimit,
                     "1 - eta_col"});

  const double eff_abs = trap_absorption(stages.eta_abs, stages.trap_detectors, stages.geometry);
  r.items.push_back({4, "light trap", status(stages.trap_detectors >= kMinTrapDetectors),
                     double(stages.trap_detectors), double(kMinTrapDetectors),
                     "effective absorption " + format_number(eff_abs) + " (" + to_string(stages.geometry) + ")"});

  r.items.push_back({5, "intrinsic conversion efficiency", CheckStatus::info, stages.eta_pe, std::nullopt,
                     "residual ceiling once items 1-4 pass; choose the material with the highest eta_pe"});

  const double dark_limit = 1.0 / (margin * margin * dead);
  if (!bracket.feasible || ratio <= kSignalToDarkRatio) {
    r.recommendations.push_back("gate the detector on for short windows after each source trigger to bring the "
                                "effective dark rate below " +
                                format_number(std::min(dark_limit, count_rate / kSignalToDarkRatio)) + " Hz");
  }
  if (!bracket.feasible) {
    r.recommendations.push_back("or shorten the dead time below " + format_number(1.0 / (margin * margin * dark)) +
                                " s");
  } else if (!inside) {
    r.recommendations.push_back("move the count rate into [" + format_number(bracket.lower) + ", " +
                                format_number(bracket.upper) + "] Hz");
  }
  if (loss >= kCollectionLossLimit) {
    r.recommendations.push_back("reduce collection-optics loss below 1e-3");
  }
  if (stages.trap_detectors < kMinTrapDetectors) {
    r.recommendations.push_back("adopt a light-trap geometry");
  }
  return r;
}

std::vector<double> delay_lines(const TrapGeometry& g, double c) {
  if (g.geometry == TrapGeometryKind::retro) {
    throw std::domain_error("retro-reflecting trap: arrival time cannot be reconstructed, no delay lines exist");
  }
  if (g.n_detectors < 1) throw std::domain_error("trap needs at least one detector");
  if (g.path_lengths.size() != std::size_t(g.n_detectors)) {
    throw std::domain_error("expected one path length per detector");
  }
  if (!(c > 0.0)) throw std::domain_error("propagation speed must be > 0");
  for (std::size_t i = 0; i < g.path_lengths.size(); ++i) {
    if (!(g.path_lengths[i] >= 0.0)) throw std::domain_error("path lengths must be >= 0");
    if (i > 0 && !(g.path_lengths[i] > g.path_lengths[i - 1])) {
      throw std::domain_error("path lengths must be strictly increasing");
    }
  }
  const double longest = g.path_lengths.back();
  std::vector<double> out;
  out.reserve(g.path_lengths.size());
  for (double p : g.path_lengths) out.push_back((longest - p) / c);
  return out;
}

}  // namespace qedet
