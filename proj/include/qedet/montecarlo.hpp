#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "qedet/statistics.hpp"

namespace qedet {

/// Photon (or photoelectron) counts, one entry per observation window.
using Counts = Eigen::Array<std::int64_t, Eigen::Dynamic, 1>;
/// Integrated charge per window, in units of one electron.
using Charges = Eigen::ArrayXd;

/// Counter-based random stream keyed by (seed, stage, index). Every window of
/// every pipeline stage gets its own stream, so results do not depend on the
/// order or the thread in which windows are processed.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint32_t stage, std::uint64_t index)
      : state_(mix(mix(seed + kGamma * (std::uint64_t(stage) + 1)) ^ (index * kIndexStride))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kIndexStride = 0xd1b54a32d192ed03ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Pipeline stage identifiers used to key the random streams.
enum class Stage : std::uint32_t { source = 0, thinning = 1, dark = 2, dead_time = 3, gain = 4 };

/// Worker count for window-parallel loops: `requested` when positive, else
/// the QEDET_THREADS environment variable, else the hardware concurrency.
int resolve_thread_count(int requested = 0);

struct GainModel {
  enum class Kind { none, deterministic, exponential };
  Kind kind{Kind::none};
  double mean_gain{1};

  static GainModel none() { return {}; }
  static GainModel deterministic(double g) { return {Kind::deterministic, g}; }
  static GainModel exponential(double g) { return {Kind::exponential, g}; }
};

const char* to_string(GainModel::Kind k);

struct SimulationConfig {
  SourceSpec source;
  double eta_effective{1};         // per-photon survival probability
  double dark_rate_per_window{0};  // mean dark counts per window
  double dead_time_windows{0};     // dead time as a fraction of the window; 0 disables
  GainModel gain;
  std::int64_t windows{1};
  std::uint64_t seed{0};
  int threads{0};  // 0: resolve_thread_count() default; never affects results
};

void validate(const SimulationConfig& c);

/// Empirical moments of a windowed count (or charge) sequence. Variance uses
/// the W - 1 divisor. Fano, SNR and their error are absent when the mean or
/// the variance is zero.
struct CountStatistics {
  double mean{0};
  double variance{0};
  std::optional<double> fano;
  std::optional<double> snr;
  std::int64_t windows{0};
  std::optional<double> standard_error_of_fano;  // fano * sqrt(2 / W)
};

template <typename Derived>
CountStatistics summarize(const Eigen::ArrayBase<Derived>& samples) {
  const Eigen::ArrayXd x = samples.template cast<double>();
  CountStatistics s;
  s.windows = x.size();
  if (x.size() == 0) return s;
  s.mean = x.mean();
  s.variance = x.size() > 1 ? (x - s.mean).square().sum() / double(x.size() - 1) : 0.0;
  if (s.mean != 0.0 && s.variance > 0.0) {
    s.fano = s.variance / s.mean;
    s.snr = s.mean / std::sqrt(s.variance);
    s.standard_error_of_fano = *s.fano * std::sqrt(2.0 / double(x.size()));
  }
  return s;
}

/// Binomial construction of a sub-Poissonian source: `trials` photons per
/// window, each present with probability `p`, so the realized Fano is 1 - p.
struct BinomialSource {
  std::int64_t trials;
  double p;
};

/// Trials = round(N / (1 - f)) and p = N / trials, which keeps the mean at N
/// exactly. Throws when fewer than one trial results.
BinomialSource binomial_source(double mean, double fano);

/// Fano factor of the generated counts, which differs from `source.fano` for
/// the deterministic train (0) and by rounding for binomial sources.
double realized_source_fano(const SourceSpec& source);
/// Mean of the generated counts.
double realized_source_mean(const SourceSpec& source);

/// Windowed photon counts of a source. Poisson for f = 1, a gamma-Poisson
/// mixture for f > 1 and a binomial for f < 1; the deterministic train emits
/// round(N) in every window.
Counts generate_counts(const SourceSpec& source, std::int64_t windows, std::uint64_t seed, int threads = 0);

/// Uncorrelated loss: each photon survives independently with probability eta.
Counts thin(const Counts& counts, double eta, std::uint64_t seed, int threads = 0);

/// Adds Poisson dark counts, then applies a non-paralyzable dead time. Events
/// are placed uniformly in the window; an event within `dead_time_windows` of
/// the last recorded one is lost, and no window records more than
/// floor(1 / dead_time_windows) events. Dead time does not carry across
/// windows.
Counts apply_dark_and_deadtime(const Counts& counts, double dark_rate_per_window, double dead_time_windows,
                               std::uint64_t seed, int threads = 0);

struct GainResult {
  Charges charges;
  /// <M^2>/<M>^2 over every drawn gain; absent when nothing was drawn.
  std::optional<double> empirical_enf;
  std::int64_t draws{0};
};

/// Multiplies every photoelectron by an independent gain draw.
GainResult apply_gain(const Counts& counts, const GainModel& gain, std::uint64_t seed, int threads = 0);

struct RunResult {
  CountStatistics counts;  // recorded counts, before gain
  CountStatistics charge;  // after gain
  std::optional<double> empirical_enf;
  std::int64_t gain_draws{0};
};

/// generate -> thin -> dark/dead time -> gain, all keyed by config.seed.
RunResult run(const SimulationConfig& config);

/// Closed-form moments of the recorded counts, ignoring dead time.
struct AnalyticPrediction {
  double mean;
  double variance;
  double fano;
  /// False when dead time is active and the prediction does not apply.
  bool applies;
};

AnalyticPrediction predict(const SimulationConfig& config);

struct OracleMoments {
  double mean;
  double variance;
};

/// Exact mean and variance of the detected count of a k-photon train under
/// independent loss, by summing over all 2^k survival patterns. k <= 12.
OracleMoments brute_force_oracle(int k, double eta);

}  // namespace qedet
