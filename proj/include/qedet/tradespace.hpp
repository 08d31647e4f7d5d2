#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qedet/catalog.hpp"
#include "qedet/efficiency.hpp"

namespace qedet {

/// Parameters a sweep can vary.
enum class SweepVariable { eta_col, eta_abs, eta_pe, eta_mul, fano, photons, trap_detectors, dark_rate, dead_time };

/// Quantities a sweep row can report. The detection efficiency used by the
/// SNR and confidence metrics is total_qe of the stage context.
enum class SweepMetric {
  total_qe,
  eta_eff_abs,
  snr_classical,
  snr_correlated_full,
  snr_correlated_approx,
  correlated_improvement,  // snr_correlated_approx / snr_classical = 1/sqrt(1 - eta)
  snr_fano_full,
  snr_fano_approx,
  fano_improvement,  // snr_fano_approx / snr_classical
  dark_adjusted_qe,
  confidence,
  rate_bracket_feasible,  // 1 or 0
};

const char* to_string(SweepVariable v);
const char* to_string(SweepMetric m);
SweepVariable sweep_variable_from_string(std::string_view s);
SweepMetric sweep_metric_from_string(std::string_view s);

/// Every quantity a metric might need. Rates are optional because some
/// metrics do not need them; validation checks the requested ones are set.
struct SweepContext {
  StageEfficiencies<double> stages;
  double fano{1};
  double photons{1e6};  // mean photons per observation window
  std::optional<double> dark_rate;    // [Hz]
  std::optional<double> dead_time;    // [s]
  std::optional<double> photon_flux;  // [Hz]
  double margin{kDefaultRateMargin};
  int n_elements{1};
  double alpha{0};
};

struct SweepSpec {
  SweepVariable variable{SweepVariable::eta_pe};
  std::vector<double> grid;
  SweepContext fixed;
  std::vector<SweepMetric> outputs;
};

/// Throws std::invalid_argument when the grid is empty or not strictly
/// monotone, no metric is requested, or a metric lacks a required input.
void validate(const SweepSpec& s);

struct SweepRow {
  double value;
  std::vector<std::optional<double>> metrics;  // aligned with SweepSpec::outputs
  std::string error;                           // empty when every metric computed
};

struct SweepTable {
  SweepVariable variable;
  std::vector<SweepMetric> outputs;
  std::vector<SweepRow> rows;
};

/// Applies one grid value to the context.
SweepContext with_value(SweepContext ctx, SweepVariable v, double value);

/// Evaluates one metric at a context. Throws on domain errors.
double evaluate_metric(const SweepContext& ctx, SweepMetric m);

/// One independent row per grid value; per-row failures are recorded in the
/// row and do not stop the sweep.
SweepTable sweep(const SweepSpec& s, int threads = 1);

/// Reads a sweep spec from JSON: {"variable", "grid", "fixed": {...},
/// "outputs"}. Keys of "fixed" are the SweepContext member names, with
/// "trap_detectors" and "geometry" for the stage layout.
SweepSpec read_sweep_spec(std::istream& in);
void write_sweep_spec(std::ostream& out, const SweepSpec& s);

/// CSV with a header row, one row per grid point in grid order. Failed cells
/// are empty and the row's error text goes in the last column.
void write_sweep_csv(std::ostream& out, const SweepTable& t);

/// Smallest trap detector count whose effective absorption reaches `target`.
/// Empty when eta_abs = 0.
std::optional<int> min_trap_detectors(double eta_abs, double target,
                                      TrapGeometryKind geometry = TrapGeometryKind::retro);

enum class CheckStatus { pass, fail, info };
const char* to_string(CheckStatus s);

struct ChecklistItem {
  int id;
  std::string name;
  CheckStatus status;
  std::optional<double> measured;
  std::optional<double> threshold;
  std::string detail;
};

struct ChecklistReport {
  std::vector<ChecklistItem> items;
  std::vector<std::string> recommendations;
  bool all_pass() const;
};

inline constexpr double kCollectionLossLimit = 1e-3;
inline constexpr double kSignalToDarkRatio = 1e3;
inline constexpr int kMinTrapDetectors = 2;

/// Five-point design review of a detection system:
///  1. signal-to-dark count ratio above 1e3
///  2. a usable count-rate bracket exists
///  3. collection loss below 1e-3
///  4. a light trap (two or more absorbers) is used
///  5. intrinsic conversion efficiency, reported only
/// Missing rates in `operating` fall back to the detector's figures; the
/// count rate falls back to total_qe * photon_flux + dark rate. Throws when
/// the dark rate is unknown.
ChecklistReport checklist(const DetectorSpec& detector, const StageEfficiencies<double>& stages,
                          const RateBudget<double>& operating, double margin = kDefaultRateMargin);

inline constexpr double kSpeedOfLight = 299792458.0;

struct TrapGeometry {
  int n_detectors{1};
  std::vector<double> path_lengths;  // source to detector k [m], strictly increasing
  TrapGeometryKind geometry{TrapGeometryKind::linear};
};

/// Signal delays that align every detector output with the farthest one:
/// (max path - path_k) / c. Only defined for the linear geometry.
std::vector<double> delay_lines(const TrapGeometry& g, double c = kSpeedOfLight);

}  // namespace qedet
