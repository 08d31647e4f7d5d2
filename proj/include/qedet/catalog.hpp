#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qedet {

/// Intrinsic optical properties of a photodiode material.
struct MaterialSpec {
  std::string name;
  double band_gap_ev{0};
  double lambda_peak_nm{0};
  double material_qe{0};
  double refractive_index{1};
  double normal_reflectivity{0};
  double brewster_angle_deg{0};

  bool operator==(const MaterialSpec&) const = default;
};

enum class DetectorMode { geiger, counting };

const char* to_string(DetectorMode m);
DetectorMode detector_mode_from_string(std::string_view s);

/// Device-level performance of a single-photon detector technology.
struct DetectorSpec {
  std::string technology;
  double bandwidth_hz{0};
  /// Absent when no figure is published. Never substitute zero.
  std::optional<double> dark_count_rate_hz;
  double operating_temp_k{0};
  double quantum_efficiency{0};
  double excess_noise_factor{1};
  double dead_time_s{0};
  DetectorMode mode{DetectorMode::geiger};
  int element_count{1};
  /// Free-form notes: alternative operating points, estimated figures.
  std::string annotation;

  bool operator==(const DetectorSpec&) const = default;
};

/// Dead time assumed when only the bandwidth is known.
inline double default_dead_time(double bandwidth_hz) { return 1.0 / bandwidth_hz; }

enum class FindingSeverity { warning, flag };

const char* to_string(FindingSeverity s);

/// A consistency observation about a spec. Findings never abort a load.
struct ValidationFinding {
  FindingSeverity severity{FindingSeverity::flag};
  std::string subject;  // material name, technology or record locator
  std::string field;
  std::optional<double> stated;
  std::optional<double> recomputed;
  std::optional<double> tolerance;
  std::string message;
};

inline constexpr double kReflectivityTolerance = 0.01;
inline constexpr double kBrewsterToleranceDeg = 1.1;

/// Normal-incidence Fresnel reflectivity ((n - 1)/(n + 1))^2.
double fresnel_normal_reflectivity(double n);
/// Brewster angle arctan(n) in degrees.
double brewster_angle_deg(double n);

std::vector<MaterialSpec> builtin_materials();
std::vector<DetectorSpec> builtin_detectors();
/// Footnotes of the detector table that do not attach to any single row.
std::vector<std::string> builtin_detector_notes();

/// Looks up a built-in detector by technology name (case-insensitive).
std::optional<DetectorSpec> find_builtin_detector(std::string_view technology);

/// Cross-checks reflectivity and Brewster angle against the refractive index.
std::vector<ValidationFinding> validate_material(const MaterialSpec& m);

/// Throws InvariantError on the first violated field invariant.
void check_invariants(const MaterialSpec& m);
void check_invariants(const DetectorSpec& d);

enum class SpecFormat { json, csv };

SpecFormat spec_format_from_string(std::string_view s);

struct SpecSet {
  std::vector<MaterialSpec> materials;
  std::vector<DetectorSpec> detectors;
  std::vector<ValidationFinding> findings;  // e.g. unknown fields
};

/// Malformed input; `position` is a byte offset (json) or line number (csv).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A field that parsed but violates its physical invariant.
class InvariantError : public std::domain_error {
 public:
  InvariantError(std::string subject, std::string field, double value, const std::string& rule);
  const std::string& subject() const { return subject_; }
  const std::string& field() const { return field_; }
  double value() const { return value_; }

 private:
  std::string subject_;
  std::string field_;
  double value_;
};

/// JSON: an object with optional "materials" and "detectors" arrays.
/// CSV: one record type per stream, chosen from the header columns
/// (refractive_index => materials, quantum_efficiency => detectors).
/// Blank input yields an empty set.
SpecSet load_specs(std::istream& in, SpecFormat format);
SpecSet load_specs_file(const std::string& path);

/// Writes specs in a form load_specs reads back to equal values. CSV output
/// holds one record type, so a set with both materials and detectors throws.
void write_specs(std::ostream& out, const SpecSet& specs, SpecFormat format);

}  // namespace qedet
