#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace qedet {

/// How reflected photons are re-presented to the absorbers of a light trap.
///
/// `retro`: the chain ends in a retro-reflecting detector, so a photon passes
/// every absorber twice except the last one (2N-1 encounters).
/// `linear`: open chain, one encounter per detector (N encounters).
enum class TrapGeometryKind { retro, linear };

inline const char* to_string(TrapGeometryKind g) {
  return g == TrapGeometryKind::retro ? "retro" : "linear";
}

/// Efficiency factors of the four-stage detection chain:
/// collection, absorption (single bounce), photo-electron conversion and
/// multiplication. `trap_detectors` is the number of absorbers in the trap.
template <typename Scalar = double>
struct StageEfficiencies {
  Scalar eta_col{1};
  Scalar eta_abs{1};
  Scalar eta_pe{1};
  Scalar eta_mul{1};
  int trap_detectors{1};
  TrapGeometryKind geometry{TrapGeometryKind::retro};
};

/// Operating rates around a detector. `dark_rate` is absent when the
/// technology has no published figure; operations that need it throw.
template <typename Scalar = double>
struct RateBudget {
  std::optional<Scalar> count_rate;  // N_c [Hz]
  std::optional<Scalar> dark_rate;   // N_d [Hz]
  Scalar dead_time{0};               // tau_D [s]
  Scalar photon_flux{0};             // N [Hz]
};

namespace detail {

template <typename Scalar>
void require_fraction(Scalar v, const char* name) {
  if (!(v >= Scalar(0) && v <= Scalar(1))) {
    throw std::domain_error(std::string(name) + " must lie in [0, 1], got " + std::to_string(double(v)));
  }
}

}  // namespace detail

inline int trap_encounters(int n_detectors, TrapGeometryKind geometry = TrapGeometryKind::retro) {
  if (n_detectors < 1) throw std::domain_error("trap needs at least one detector");
  return geometry == TrapGeometryKind::retro ? 2 * n_detectors - 1 : n_detectors;
}

/// Effective absorption of a light trap: the probability that a photon is
/// absorbed in one of its encounters with the absorbing surfaces,
/// 1 - (1 - eta_abs)^encounters.
template <typename Scalar>
Scalar trap_absorption(Scalar eta_abs, int n_detectors,
                       TrapGeometryKind geometry = TrapGeometryKind::retro) {
  using std::pow;
  detail::require_fraction(eta_abs, "eta_abs");
  const int encounters = trap_encounters(n_detectors, geometry);
  if (encounters == 1) return eta_abs;
  return Scalar(1) - pow(Scalar(1) - eta_abs, encounters);
}

template <typename Scalar>
void validate(const StageEfficiencies<Scalar>& s) {
  detail::require_fraction(s.eta_col, "eta_col");
  detail::require_fraction(s.eta_abs, "eta_abs");
  detail::require_fraction(s.eta_pe, "eta_pe");
  detail::require_fraction(s.eta_mul, "eta_mul");
  if (s.trap_detectors < 1) throw std::domain_error("trap_detectors must be >= 1");
}

/// End-to-end quantum efficiency of the chain.
template <typename Scalar>
Scalar total_qe(const StageEfficiencies<Scalar>& s) {
  validate(s);
  return s.eta_col * trap_absorption(s.eta_abs, s.trap_detectors, s.geometry) * s.eta_pe * s.eta_mul;
}

template <typename Scalar = double>
struct DarkAdjustedQe {
  Scalar adjusted;                    // eta_total - N_d / N; may be negative
  std::optional<Scalar> from_counts;  // (N_c - N_d) / N when N_c is known
};

/// Quantum efficiency after subtracting the dark-count contribution.
/// The result is signed: a negative value means the dark rate exceeds the
/// detected signal rate.
template <typename Scalar>
DarkAdjustedQe<Scalar> dark_adjusted_qe(Scalar eta_total, const RateBudget<Scalar>& b) {
  if (!(b.photon_flux > Scalar(0))) throw std::domain_error("photon_flux must be > 0");
  if (!b.dark_rate) throw std::domain_error("dark count rate is unknown for this detector");
  const Scalar dark = *b.dark_rate;
  if (dark < Scalar(0)) throw std::domain_error("dark_rate must be >= 0");
  DarkAdjustedQe<Scalar> out{eta_total - dark / b.photon_flux, std::nullopt};
  if (b.count_rate) out.from_counts = (*b.count_rate - dark) / b.photon_flux;
  return out;
}

/// Planck constant times speed of light, from the exact SI definitions [J m].
inline constexpr double kPlanckTimesC = 6.62607015e-34 * 299792458.0;

/// Photon flux [1/s] carried by an optical power at a given vacuum wavelength.
template <typename Scalar>
Scalar photon_flux(Scalar power_watts, Scalar wavelength_m) {
  if (!(wavelength_m > Scalar(0))) throw std::domain_error("wavelength must be > 0");
  if (power_watts < Scalar(0)) throw std::domain_error("power must be >= 0");
  return wavelength_m * power_watts / Scalar(kPlanckTimesC);
}

inline constexpr double kDefaultRateMargin = 1e3;

template <typename Scalar = double>
struct RateBracket {
  bool feasible;
  Scalar lower;  // margin * N_d
  Scalar upper;  // 1 / (margin * tau_D)
  /// lower / upper; > 1 when infeasible, reports how far apart the limits are.
  Scalar gap_ratio;
};

/// Count-rate window that keeps the detector well above its dark rate and
/// well below saturation: [margin * N_d, 1 / (margin * tau_D)].
template <typename Scalar>
RateBracket<Scalar> rate_bracket(const RateBudget<Scalar>& b, Scalar margin = Scalar(kDefaultRateMargin)) {
  if (!b.dark_rate) throw std::domain_error("dark count rate is unknown for this detector");
  if (!(b.dead_time > Scalar(0))) throw std::domain_error("dead_time must be > 0");
  if (!(margin >= Scalar(1))) throw std::domain_error("margin must be >= 1");
  if (*b.dark_rate < Scalar(0)) throw std::domain_error("dark_rate must be >= 0");
  const Scalar lower = margin * *b.dark_rate;
  const Scalar upper = Scalar(1) / (margin * b.dead_time);
  // Decided on the product form so the boundary case is exact.
  const bool feasible = margin * margin * *b.dark_rate * b.dead_time < Scalar(1);
  return {feasible, lower, upper, lower / upper};
}

}  // namespace qedet
