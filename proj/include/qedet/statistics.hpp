#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace qedet {

enum class SourceKind { poisson, fano, deterministic };

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::poisson: return "poisson";
    case SourceKind::fano: return "fano";
    case SourceKind::deterministic: return "deterministic";
  }
  return "?";
}

/// Photon source described by its mean count per observation window and its
/// Fano factor. A deterministic (perfectly correlated) train carries
/// fano = 1 / mean_photons.
struct SourceSpec {
  SourceKind kind{SourceKind::poisson};
  double mean_photons{1};
  double fano{1};

  static SourceSpec poisson(double n) { return checked({SourceKind::poisson, n, 1.0}); }
  static SourceSpec with_fano(double n, double f) { return checked({SourceKind::fano, n, f}); }
  static SourceSpec deterministic(double n) { return checked({SourceKind::deterministic, n, 1.0 / n}); }

  static SourceSpec checked(SourceSpec s) {
    if (!(s.mean_photons > 0)) throw std::domain_error("mean_photons must be > 0");
    if (!(s.fano > 0)) throw std::domain_error("fano must be > 0");
    return s;
  }
};

// Signal-to-noise ratios of a photon count of mean N seen through a detector
// of efficiency eta. Where the textbook form carries a large-N approximation,
// both the full expression and the approximation are returned: they differ by
// up to a factor sqrt(eta) and must not be conflated.

/// Shot-noise limited SNR of classical (Poissonian) light: sqrt(eta N).
template <typename Scalar>
Scalar snr_classical(Scalar eta, Scalar n) {
  using std::sqrt;
  if (!(eta > Scalar(0) && eta <= Scalar(1))) throw std::domain_error("eta must lie in (0, 1]");
  if (!(n > Scalar(0))) throw std::domain_error("n must be > 0");
  return sqrt(eta * n);
}

template <typename Scalar = double>
struct CorrelatedSnr {
  Scalar full;    // eta N / sqrt(eta + (1 - eta) N)
  Scalar approx;  // sqrt(eta N) / sqrt(1 - eta)
  /// N >= 10 eta / (1 - eta): the approximation's large-N condition, one decade.
  bool approx_valid;
};

/// SNR of a perfectly correlated photon train after uncorrelated loss.
template <typename Scalar>
CorrelatedSnr<Scalar> snr_correlated(Scalar eta, Scalar n) {
  using std::sqrt;
  if (!(eta > Scalar(0) && eta < Scalar(1))) throw std::domain_error("eta must lie in (0, 1)");
  if (!(n > Scalar(0))) throw std::domain_error("n must be > 0");
  const Scalar loss = Scalar(1) - eta;
  return {eta * n / sqrt(eta + loss * n), sqrt(eta * n) / sqrt(loss), n >= Scalar(10) * eta / loss};
}

/// Which term dominates the squeezed-light SNR denominator f + (1 - eta)/eta.
enum class SnrRegime { squeezing_limited, loss_limited, mixed };

inline const char* to_string(SnrRegime r) {
  switch (r) {
    case SnrRegime::squeezing_limited: return "squeezing-limited";
    case SnrRegime::loss_limited: return "loss-limited";
    case SnrRegime::mixed: return "mixed";
  }
  return "?";
}

template <typename Scalar = double>
struct FanoSnr {
  Scalar full;    // eta N / sqrt(eta f N + (1 - eta) N)
  Scalar approx;  // sqrt(eta N) / sqrt(f + (1 - eta) / eta)
  SnrRegime regime;
  /// f / ((1 - eta) / eta); infinite when eta = 1.
  Scalar regime_ratio;
};

/// Decade threshold on f / ((1 - eta)/eta) used to name the regime.
template <typename Scalar>
SnrRegime classify_regime(Scalar ratio) {
  if (ratio >= Scalar(10)) return SnrRegime::squeezing_limited;
  if (ratio <= Scalar(0.1)) return SnrRegime::loss_limited;
  return SnrRegime::mixed;
}

/// SNR of light with Fano factor f after uncorrelated loss.
template <typename Scalar>
FanoSnr<Scalar> snr_fano(Scalar eta, Scalar f, Scalar n) {
  using std::sqrt;
  if (!(eta > Scalar(0) && eta <= Scalar(1))) throw std::domain_error("eta must lie in (0, 1]");
  if (!(f > Scalar(0))) throw std::domain_error("fano must be > 0");
  if (!(n > Scalar(0))) throw std::domain_error("n must be > 0");
  const Scalar loss = Scalar(1) - eta;
  const Scalar loss_term = loss / eta;
  const Scalar ratio = loss_term > Scalar(0) ? f / loss_term : std::numeric_limits<Scalar>::infinity();
  return {eta * n / sqrt(eta * f * n + loss * n), sqrt(eta * n) / sqrt(f + loss_term),
          classify_regime(ratio), ratio};
}

/// Largest Fano factor that still delivers an amplitude SNR improvement of
/// `improvement_factor` over sqrt(eta N) in the large-N form, i.e. the f that
/// solves sqrt(f + (1 - eta)/eta) = 1 / improvement_factor.
/// Empty when detector loss alone already exceeds the budget.
template <typename Scalar>
std::optional<Scalar> squeezing_bound(Scalar improvement_factor, Scalar eta) {
  if (!(improvement_factor > Scalar(1))) throw std::domain_error("improvement_factor must be > 1");
  if (!(eta > Scalar(0) && eta <= Scalar(1))) throw std::domain_error("eta must lie in (0, 1]");
  const Scalar f_max = Scalar(1) / (improvement_factor * improvement_factor) - (Scalar(1) - eta) / eta;
  if (f_max < Scalar(0)) return std::nullopt;
  return f_max;
}

template <typename Scalar = double>
struct ConfidenceInputs {
  int n_elements{1};
  Scalar eta{1};
  Scalar alpha{0};
};

/// Probability that simultaneously arriving photons of a maximally entangled
/// state land on distinct elements of an N_E-element detector, with
/// delta = alpha^2 / 2.
template <typename Scalar>
Scalar confidence(const ConfidenceInputs<Scalar>& c) {
  if (c.n_elements < 1) throw std::domain_error("n_elements must be >= 1");
  if (!(c.eta >= Scalar(0) && c.eta <= Scalar(1))) throw std::domain_error("eta must lie in [0, 1]");
  if (!(c.alpha >= Scalar(0))) throw std::domain_error("alpha must be >= 0");
  const Scalar ne = Scalar(c.n_elements);
  const Scalar delta = c.alpha * c.alpha / Scalar(2);
  const Scalar eta2 = c.eta * c.eta;
  return ne / (ne + delta * (eta2 + Scalar(2) * ne * (Scalar(1) - eta2)));
}

/// F = <M^2> / <M>^2 of a multiplication gain M.
template <typename Scalar>
Scalar excess_noise_factor(Scalar mean_gain, Scalar mean_square_gain) {
  if (!(mean_gain > Scalar(0))) throw std::domain_error("mean gain must be > 0");
  if (mean_square_gain < mean_gain * mean_gain) {
    throw std::domain_error("mean square gain below squared mean gain");
  }
  return mean_square_gain / (mean_gain * mean_gain);
}

template <typename Scalar = double>
struct NoiseBudget {
  Scalar total;
  bool shot_limited;  // shot variance at least the sum of every other term
};

template <typename Scalar>
NoiseBudget<Scalar> noise_budget(Scalar shot, Scalar dark, Scalar stray, Scalar other) {
  if (shot < Scalar(0) || dark < Scalar(0) || stray < Scalar(0) || other < Scalar(0)) {
    throw std::domain_error("variance terms must be >= 0");
  }
  const Scalar rest = dark + stray + other;
  return {shot + rest, shot >= rest};
}

/// Amplitude ratio in decibels (20 log10).
template <typename Scalar>
Scalar amplitude_ratio_db(Scalar ratio) {
  using std::log10;
  return Scalar(20) * log10(ratio);
}

/// The same ratio read as a power ratio (10 log10).
template <typename Scalar>
Scalar power_ratio_db(Scalar ratio) {
  using std::log10;
  return Scalar(10) * log10(ratio);
}

}  // namespace qedet
