#include "qedet/montecarlo.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qedet {

namespace {

constexpr std::int64_t kMinWindowsPerThread = 256;

template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  const std::int64_t workers =
      std::clamp<std::int64_t>(std::min<std::int64_t>(resolve_thread_count(threads), n / kMinWindowsPerThread), 1, n > 0 ? n : 1);
  if (workers == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(std::size_t(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    });
  }
}

StreamRng stream(std::uint64_t seed, Stage stage, std::int64_t window) {
  return StreamRng(seed, static_cast<std::uint32_t>(stage), static_cast<std::uint64_t>(window));
}

void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QEDET_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

const char* to_string(GainModel::Kind k) {
  switch (k) {
    case GainModel::Kind::none: return "none";
    case GainModel::Kind::deterministic: return "deterministic";
    case GainModel::Kind::exponential: return "exponential";
  }
  return "?";
}

void validate(const SimulationConfig& c) {
  SourceSpec::checked(c.source);
  require_probability(c.eta_effective, "eta_effective");
  if (!(c.dark_rate_per_window >= 0.0)) throw std::domain_error("dark_rate_per_window must be >= 0");
  if (!(c.dead_time_windows >= 0.0)) throw std::domain_error("dead_time_windows must be >= 0");
  if (c.windows < 1) throw std::domain_error("windows must be >= 1");
  if (c.gain.kind != GainModel::Kind::none && !(c.gain.mean_gain > 0.0)) {
    throw std::domain_error("mean gain must be > 0");
  }
}

BinomialSource binomial_source(double mean, double fano) {
  if (!(fano > 0.0 && fano < 1.0)) throw std::domain_error("binomial source needs 0 < fano < 1");
  const double trials = std::round(mean / (1.0 - fano));
  if (trials < 1.0) {
    throw std::domain_error("fano source: N / (1 - f) rounds to fewer than one trial");
  }
  const double p = mean / trials;
  if (p > 1.0) throw std::domain_error("fano source: mean exceeds the number of trials");
  return {static_cast<std::int64_t>(trials), p};
}

double realized_source_fano(const SourceSpec& s) {
  switch (s.kind) {
    case SourceKind::deterministic: return 0.0;
    case SourceKind::poisson: return 1.0;
    case SourceKind::fano:
      if (s.fano < 1.0) return 1.0 - binomial_source(s.mean_photons, s.fano).p;
      return s.fano;
  }
  return s.fano;
}

double realized_source_mean(const SourceSpec& s) {
  return s.kind == SourceKind::deterministic ? std::round(s.mean_photons) : s.mean_photons;
}

Counts generate_counts(const SourceSpec& source, std::int64_t windows, std::uint64_t seed, int threads) {
  SourceSpec::checked(source);
  if (windows < 1) throw std::domain_error("windows must be >= 1");
  Counts out(windows);
  const double n = source.mean_photons;

  if (source.kind == SourceKind::deterministic) {
    out.setConstant(std::llround(n));
    return out;
  }
  if (source.kind == SourceKind::poisson || source.fano == 1.0) {
    parallel_for(windows, threads, [&](std::int64_t w) {
      auto rng = stream(seed, Stage::source, w);
      out[w] = std::poisson_distribution<std::int64_t>(n)(rng);
    });
    return out;
  }
  if (source.fano < 1.0) {
    const auto b = binomial_source(n, source.fano);
    parallel_for(windows, threads, [&](std::int64_t w) {
      auto rng = stream(seed, Stage::source, w);
      out[w] = std::binomial_distribution<std::int64_t>(b.trials, b.p)(rng);
    });
    return out;
  }
  // Super-Poissonian: Poisson with a gamma-distributed rate of mean N and
  // variance (f - 1) N gives variance f N.
  const double shape = n / (source.fano - 1.0);
  const double scale = source.fano - 1.0;
  parallel_for(windows, threads, [&](std::int64_t w) {
    auto rng = stream(seed, Stage::source, w);
    const double rate = std::gamma_distribution<double>(shape, scale)(rng);
    out[w] = rate > 0.0 ? std::poisson_distribution<std::int64_t>(rate)(rng) : 0;
  });
  return out;
}

Counts thin(const Counts& counts, double eta, std::uint64_t seed, int threads) {
  require_probability(eta, "eta");
  if (eta == 1.0) return counts;
  Counts out(counts.size());
  if (eta == 0.0) {
    out.setZero();
    return out;
  }
  parallel_for(counts.size(), threads, [&](std::int64_t w) {
    auto rng = stream(seed, Stage::thinning, w);
    out[w] = counts[w] > 0 ? std::binomial_distribution<std::int64_t>(counts[w], eta)(rng) : 0;
  });
  return out;
}

Counts apply_dark_and_deadtime(const Counts& counts, double dark_rate_per_window, double dead_time_windows,
                               std::uint64_t seed, int threads) {
  if (!(dark_rate_per_window >= 0.0)) throw std::domain_error("dark_rate_per_window must be >= 0");
  if (!(dead_time_windows >= 0.0)) throw std::domain_error("dead_time_windows must be >= 0");
  Counts out = counts;
  if (dark_rate_per_window > 0.0) {
    parallel_for(out.size(), threads, [&](std::int64_t w) {
      auto rng = stream(seed, Stage::dark, w);
      out[w] += std::poisson_distribution<std::int64_t>(dark_rate_per_window)(rng);
    });
  }
  if (dead_time_windows > 0.0) {
    const auto cap = static_cast<std::int64_t>(std::floor(1.0 / dead_time_windows));
    parallel_for(out.size(), threads, [&](std::int64_t w) {
      const std::int64_t events = out[w];
      if (events == 0) return;
      auto rng = stream(seed, Stage::dead_time, w);
      std::vector<double> times(static_cast<std::size_t>(events));
      for (auto& t : times) t = rng.uniform();
      std::sort(times.begin(), times.end());
      std::int64_t recorded = 1;
      double live_from = times.front() + dead_time_windows;
      for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] >= live_from) {
          ++recorded;
          live_from = times[i] + dead_time_windows;
        }
      }
      out[w] = std::min(recorded, cap);
    });
  }
  return out;
}

GainResult apply_gain(const Counts& counts, const GainModel& gain, std::uint64_t seed, int threads) {
  GainResult out;
  out.draws = counts.sum();
  if (gain.kind == GainModel::Kind::none) {
    out.charges = counts.cast<double>();
    out.empirical_enf = 1.0;
    return out;
  }
  if (!(gain.mean_gain > 0.0)) throw std::domain_error("mean gain must be > 0");

  const auto n = counts.size();
  out.charges.resize(n);
  Eigen::ArrayXd sum_sq(n);
  parallel_for(n, threads, [&](std::int64_t w) {
    double s = 0.0;
    double s2 = 0.0;
    if (gain.kind == GainModel::Kind::deterministic) {
      for (std::int64_t i = 0; i < counts[w]; ++i) {
        s += gain.mean_gain;
        s2 += gain.mean_gain * gain.mean_gain;
      }
    } else {
      auto rng = stream(seed, Stage::gain, w);
      std::exponential_distribution<double> draw(1.0 / gain.mean_gain);
      for (std::int64_t i = 0; i < counts[w]; ++i) {
        const double m = draw(rng);
        s += m;
        s2 += m * m;
      }
    }
    out.charges[w] = s;
    sum_sq[w] = s2;
  });

  if (out.draws > 0) {
    // Reduce in window order so the result is independent of the thread count.
    double s = 0.0;
    double s2 = 0.0;
    for (Eigen::Index w = 0; w < n; ++w) {
      s += out.charges[w];
      s2 += sum_sq[w];
    }
    const double draws = double(out.draws);
    out.empirical_enf = excess_noise_factor(s / draws, std::max(s2 / draws, (s / draws) * (s / draws)));
  }
  return out;
}

RunResult run(const SimulationConfig& config) {
  validate(config);
  const auto t = config.threads;
  const Counts emitted = generate_counts(config.source, config.windows, config.seed, t);
  const Counts detected = thin(emitted, config.eta_effective, config.seed, t);
  const Counts recorded =
      apply_dark_and_deadtime(detected, config.dark_rate_per_window, config.dead_time_windows, config.seed, t);
  const GainResult gained = apply_gain(recorded, config.gain, config.seed, t);
  return {summarize(recorded), summarize(gained.charges), gained.empirical_enf, gained.draws};
}

AnalyticPrediction predict(const SimulationConfig& c) {
  validate(c);
  const double m = realized_source_mean(c.source);
  const double v = realized_source_fano(c.source) * m;
  const double eta = c.eta_effective;
  const double mean = eta * m + c.dark_rate_per_window;
  const double var = eta * eta * v + eta * (1.0 - eta) * m + c.dark_rate_per_window;
  return {mean, var, mean > 0.0 ? var / mean : 0.0, c.dead_time_windows == 0.0};
}

OracleMoments brute_force_oracle(int k, double eta) {
  if (k < 0 || k > 12) throw std::domain_error("brute_force_oracle supports 0 <= k <= 12");
  require_probability(eta, "eta");
  // Pattern weights, then two passes so the variance is a sum of nonnegative terms.
  std::vector<double> weight(std::size_t(1) << k, 1.0);
  std::vector<int> detected(weight.size(), 0);
  for (std::uint32_t pattern = 0; pattern < weight.size(); ++pattern) {
    for (int bit = 0; bit < k; ++bit) {
      if (pattern & (1u << bit)) {
        weight[pattern] *= eta;
        ++detected[pattern];
      } else {
        weight[pattern] *= 1.0 - eta;
      }
    }
  }
  long double mean = 0.0L;
  for (std::size_t i = 0; i < weight.size(); ++i) mean += (long double)weight[i] * detected[i];
  long double variance = 0.0L;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const long double dev = detected[i] - mean;
    variance += (long double)weight[i] * dev * dev;
  }
  return {double(mean), double(variance)};
}

}  // namespace qedet
