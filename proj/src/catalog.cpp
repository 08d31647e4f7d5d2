#include "qedet/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qedet/format.hpp"

namespace qedet {

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

const std::vector<std::string> kMaterialFields = {
    "name", "band_gap", "lambda_peak", "material_qe", "refractive_index", "normal_reflectivity", "brewster_angle"};

const std::vector<std::string> kDetectorFields = {
    "technology", "bandwidth", "dark_count_rate", "operating_temp", "quantum_efficiency",
    "excess_noise_factor", "dead_time", "mode", "element_count", "annotation"};

}  // namespace

const char* to_string(DetectorMode m) { return m == DetectorMode::geiger ? "geiger" : "counting"; }

DetectorMode detector_mode_from_string(std::string_view s) {
  const auto l = lower(s);
  if (l == "geiger") return DetectorMode::geiger;
  if (l == "counting") return DetectorMode::counting;
  throw std::invalid_argument("unknown detector mode '" + std::string(s) + "'");
}

const char* to_string(FindingSeverity s) { return s == FindingSeverity::warning ? "warning" : "flag"; }

SpecFormat spec_format_from_string(std::string_view s) {
  const auto l = lower(s);
  if (l == "json") return SpecFormat::json;
  if (l == "csv") return SpecFormat::csv;
  throw std::invalid_argument("unknown spec format '" + std::string(s) + "'");
}

InvariantError::InvariantError(std::string subject, std::string field, double value, const std::string& rule)
    : std::domain_error(subject + ": " + field + " = " + format_number(value) + " violates " + rule),
      subject_(std::move(subject)),
      field_(std::move(field)),
      value_(value) {}

double fresnel_normal_reflectivity(double n) {
  const double r = (n - 1.0) / (n + 1.0);
  return r * r;
}

double brewster_angle_deg(double n) { return std::atan(n) * 180.0 / std::numbers::pi; }

std::vector<MaterialSpec> builtin_materials() {
  return {
      {"Si", 1.11, 800.0, 0.99, 3.5, 0.31, 74.0},
      {"Ge", 0.66, 1600.0, 0.88, 4.0, 0.36, 75.0},
      {"InGaAs", 1.0, 1000.0, 0.98, 3.7, 0.33, 76.0},
  };
}

std::vector<DetectorSpec> builtin_detectors() {
  auto make = [](std::string tech, double bw, std::optional<double> dark, double temp, double qe, double enf,
                 DetectorMode mode, std::string note) {
    return DetectorSpec{std::move(tech), bw, dark, temp, qe, enf, default_dead_time(bw), mode, 1, std::move(note)};
  };
  return {
      make("PMT", 1.5e9, std::nullopt, 300.0, 0.40, 1.2, DetectorMode::geiger, "dark count rate not reported"),
      make("APD", 1e9, 25.0, 300.0, 0.75, 2.0, DetectorMode::geiger, "also operated at 77 K"),
      make("VLPC", 3e8, 2e4, 6.0, 0.94, 1.015, DetectorMode::counting, ""),
      make("TES", 2e4, 0.001, 0.1, 0.20, 1.0, DetectorMode::counting, "excess noise factor approximately 1"),
      make("SSPD", 3e10, 0.01, 5.0, 0.03, 1.0, DetectorMode::geiger,
           "light-trap quantum efficiency estimate 0.9; excess noise factor approximately 1"),
  };
}

std::vector<std::string> builtin_detector_notes() {
  return {"table footnote: assumes eta_det = 0.125 (no row references it)",
          "parenthesized figures are assumed values or calculated estimates"};
}

std::optional<DetectorSpec> find_builtin_detector(std::string_view technology) {
  const auto key = lower(technology);
  for (auto& d : builtin_detectors()) {
    if (lower(d.technology) == key) return d;
  }
  return std::nullopt;
}

std::vector<ValidationFinding> validate_material(const MaterialSpec& m) {
  std::vector<ValidationFinding> out;
  const double r = fresnel_normal_reflectivity(m.refractive_index);
  if (std::abs(m.normal_reflectivity - r) > kReflectivityTolerance) {
    out.push_back({FindingSeverity::flag, m.name, "normal_reflectivity", m.normal_reflectivity, r,
                   kReflectivityTolerance,
                   "stated reflectivity differs from ((n-1)/(n+1))^2 = " + format_number(r)});
  }
  const double b = brewster_angle_deg(m.refractive_index);
  if (std::abs(m.brewster_angle_deg - b) > kBrewsterToleranceDeg) {
    out.push_back({FindingSeverity::flag, m.name, "brewster_angle", m.brewster_angle_deg, b, kBrewsterToleranceDeg,
                   "stated Brewster angle differs from arctan(n) = " + format_number(b) + " deg"});
  }
  return out;
}

void check_invariants(const MaterialSpec& m) {
  const auto& s = m.name;
  if (s.empty()) throw InvariantError("<material>", "name", 0.0, "non-empty name");
  if (!(m.band_gap_ev > 0)) throw InvariantError(s, "band_gap", m.band_gap_ev, "band_gap > 0");
  if (!(m.lambda_peak_nm > 0)) throw InvariantError(s, "lambda_peak", m.lambda_peak_nm, "lambda_peak > 0");
  if (!(m.material_qe >= 0 && m.material_qe <= 1))
    throw InvariantError(s, "material_qe", m.material_qe, "0 <= material_qe <= 1");
  if (!(m.refractive_index > 1))
    throw InvariantError(s, "refractive_index", m.refractive_index, "refractive_index > 1");
  if (!(m.normal_reflectivity >= 0 && m.normal_reflectivity <= 1))
    throw InvariantError(s, "normal_reflectivity", m.normal_reflectivity, "0 <= normal_reflectivity <= 1");
  if (!(m.brewster_angle_deg > 0 && m.brewster_angle_deg < 90))
    throw InvariantError(s, "brewster_angle", m.brewster_angle_deg, "0 < brewster_angle < 90");
}

void check_invariants(const DetectorSpec& d) {
  const auto& s = d.technology;
  if (s.empty()) throw InvariantError("<detector>", "technology", 0.0, "non-empty technology");
  if (!(d.bandwidth_hz > 0)) throw InvariantError(s, "bandwidth", d.bandwidth_hz, "bandwidth > 0");
  if (d.dark_count_rate_hz && !(*d.dark_count_rate_hz >= 0))
    throw InvariantError(s, "dark_count_rate", *d.dark_count_rate_hz, "dark_count_rate >= 0");
  if (!(d.operating_temp_k > 0)) throw InvariantError(s, "operating_temp", d.operating_temp_k, "operating_temp > 0");
  if (!(d.quantum_efficiency >= 0 && d.quantum_efficiency <= 1))
    throw InvariantError(s, "quantum_efficiency", d.quantum_efficiency, "0 <= quantum_efficiency <= 1");
  if (!(d.excess_noise_factor >= 1))
    throw InvariantError(s, "excess_noise_factor", d.excess_noise_factor, "excess_noise_factor >= 1");
  if (!(d.dead_time_s > 0)) throw InvariantError(s, "dead_time", d.dead_time_s, "dead_time > 0");
  if (d.element_count < 1) throw InvariantError(s, "element_count", d.element_count, "element_count >= 1");
}

// ---------------------------------------------------------------------------
// Record decoding shared by the JSON and CSV readers. Each record arrives as a
// field -> raw value map; absent optional fields are simply missing.

namespace {

struct RawValue {
  std::optional<double> number;
  std::optional<std::string> text;
};

using RawRecord = std::map<std::string, RawValue>;

class RecordReader {
 public:
  RecordReader(const RawRecord& rec, std::string locator, std::size_t position)
      : rec_(rec), locator_(std::move(locator)), position_(position) {}

  bool has(const std::string& f) const {
    auto it = rec_.find(f);
    return it != rec_.end() && (it->second.number || it->second.text);
  }

  double number(const std::string& f) const {
    auto v = optional_number(f);
    if (!v) fail("missing field '" + f + "'");
    return *v;
  }

  std::optional<double> optional_number(const std::string& f) const {
    auto it = rec_.find(f);
    if (it == rec_.end()) return std::nullopt;
    if (it->second.number) return it->second.number;
    if (it->second.text) fail("field '" + f + "' is not a number: '" + *it->second.text + "'");
    return std::nullopt;
  }

  std::string text(const std::string& f, const std::string& fallback = {}) const {
    auto it = rec_.find(f);
    if (it == rec_.end()) return fallback;
    if (it->second.text) return *it->second.text;
    if (it->second.number) return format_number(*it->second.number);
    return fallback;
  }

  int integer(const std::string& f, int fallback) const {
    auto v = optional_number(f);
    if (!v) return fallback;
    if (*v != std::floor(*v)) fail("field '" + f + "' must be an integer");
    return static_cast<int>(*v);
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(locator_ + ": " + msg, position_); }

 private:
  const RawRecord& rec_;
  std::string locator_;
  std::size_t position_;
};

void report_unknown(const RawRecord& rec, const std::vector<std::string>& known, const std::string& locator,
                    std::vector<ValidationFinding>& findings) {
  for (const auto& [key, _] : rec) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      findings.push_back({FindingSeverity::warning, locator, key, std::nullopt, std::nullopt, std::nullopt,
                          "unknown field ignored"});
    }
  }
}

MaterialSpec decode_material(const RecordReader& r) {
  MaterialSpec m;
  m.name = r.text("name");
  if (m.name.empty()) r.fail("missing field 'name'");
  m.band_gap_ev = r.number("band_gap");
  m.lambda_peak_nm = r.number("lambda_peak");
  m.material_qe = r.number("material_qe");
  m.refractive_index = r.number("refractive_index");
  m.normal_reflectivity = r.number("normal_reflectivity");
  m.brewster_angle_deg = r.number("brewster_angle");
  check_invariants(m);
  return m;
}

DetectorSpec decode_detector(const RecordReader& r) {
  DetectorSpec d;
  d.technology = r.text("technology");
  if (d.technology.empty()) r.fail("missing field 'technology'");
  d.bandwidth_hz = r.number("bandwidth");
  d.dark_count_rate_hz = r.optional_number("dark_count_rate");
  d.operating_temp_k = r.number("operating_temp");
  d.quantum_efficiency = r.number("quantum_efficiency");
  d.excess_noise_factor = r.optional_number("excess_noise_factor").value_or(1.0);
  if (auto dt = r.optional_number("dead_time")) {
    d.dead_time_s = *dt;
  } else if (d.bandwidth_hz > 0) {
    d.dead_time_s = default_dead_time(d.bandwidth_hz);
  }
  const auto mode = r.text("mode", "geiger");
  try {
    d.mode = detector_mode_from_string(mode);
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
  d.element_count = r.integer("element_count", 1);
  d.annotation = r.text("annotation");
  check_invariants(d);
  return d;
}

RawRecord raw_from_json(const json& obj, const RecordReader& ctx_fail_only) {
  RawRecord rec;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const auto& v = it.value();
    if (v.is_null()) continue;
    if (v.is_number()) {
      rec[it.key()] = {v.get<double>(), std::nullopt};
    } else if (v.is_string()) {
      rec[it.key()] = {std::nullopt, v.get<std::string>()};
    } else if (v.is_boolean()) {
      rec[it.key()] = {std::nullopt, v.get<bool>() ? "true" : "false"};
    } else {
      ctx_fail_only.fail("field '" + it.key() + "' has unsupported type");
    }
  }
  return rec;
}

SpecSet load_json(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  SpecSet out;
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) return out;

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ParseError("top-level JSON value must be an object", 0);

  static const RawRecord kEmpty;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "materials" && it.key() != "detectors") {
      out.findings.push_back({FindingSeverity::warning, "<document>", it.key(), std::nullopt, std::nullopt,
                              std::nullopt, "unknown field ignored"});
    }
  }

  auto each = [&](const char* key, const std::vector<std::string>& known, auto&& decode, auto& sink) {
    if (!doc.contains(key)) return;
    const auto& arr = doc[key];
    if (!arr.is_array()) throw ParseError(std::string("'") + key + "' must be an array", 0);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string locator = std::string(key) + "[" + std::to_string(i) + "]";
      if (!arr[i].is_object()) throw ParseError(locator + ": record must be an object", i);
      const RecordReader guard(kEmpty, locator, i);
      const RawRecord rec = raw_from_json(arr[i], guard);
      report_unknown(rec, known, locator, out.findings);
      sink.push_back(decode(RecordReader(rec, locator, i)));
    }
  };
  each("materials", kMaterialFields, decode_material, out.materials);
  each("detectors", kDetectorFields, decode_detector, out.detectors);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quoted field", line_no);
  cells.push_back(std::move(cur));
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

SpecSet load_csv(std::istream& in) {
  SpecSet out;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  bool materials = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line, line_no);
    for (auto& c : cells) c = trim(std::move(c));
    if (header.empty()) {
      header = std::move(cells);
      const bool has_mat = std::count(header.begin(), header.end(), "refractive_index") > 0;
      const bool has_det = std::count(header.begin(), header.end(), "quantum_efficiency") > 0;
      if (has_mat == has_det) {
        throw ParseError("line " + std::to_string(line_no) +
                             ": header must identify exactly one record type "
                             "(refractive_index for materials, quantum_efficiency for detectors)",
                         line_no);
      }
      materials = has_mat;
      continue;
    }
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                           " columns, found " + std::to_string(cells.size()),
                       line_no);
    }
    RawRecord rec;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (cells[i].empty()) continue;
      if (auto v = parse_double(cells[i])) {
        rec[header[i]] = {v, std::nullopt};
      } else {
        rec[header[i]] = {std::nullopt, cells[i]};
      }
    }
    // Names are text even when they look numeric.
    for (const char* f : {"name", "technology", "annotation", "mode"}) {
      auto it = rec.find(f);
      if (it != rec.end() && it->second.number) {
        const auto col = std::find(header.begin(), header.end(), f) - header.begin();
        it->second = {std::nullopt, cells[col]};
      }
    }
    const std::string locator = "line " + std::to_string(line_no);
    const RecordReader reader(rec, locator, line_no);
    if (materials) {
      report_unknown(rec, kMaterialFields, locator, out.findings);
      out.materials.push_back(decode_material(reader));
    } else {
      report_unknown(rec, kDetectorFields, locator, out.findings);
      out.detectors.push_back(decode_detector(reader));
    }
  }
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

json material_to_json(const MaterialSpec& m) {
  json j = json::object();
  j["name"] = m.name;
  j["band_gap"] = m.band_gap_ev;
  j["lambda_peak"] = m.lambda_peak_nm;
  j["material_qe"] = m.material_qe;
  j["refractive_index"] = m.refractive_index;
  j["normal_reflectivity"] = m.normal_reflectivity;
  j["brewster_angle"] = m.brewster_angle_deg;
  return j;
}

json detector_to_json(const DetectorSpec& d) {
  json j = json::object();
  j["technology"] = d.technology;
  j["bandwidth"] = d.bandwidth_hz;
  j["dark_count_rate"] = d.dark_count_rate_hz ? json(*d.dark_count_rate_hz) : json(nullptr);
  j["operating_temp"] = d.operating_temp_k;
  j["quantum_efficiency"] = d.quantum_efficiency;
  j["excess_noise_factor"] = d.excess_noise_factor;
  j["dead_time"] = d.dead_time_s;
  j["mode"] = to_string(d.mode);
  j["element_count"] = d.element_count;
  j["annotation"] = d.annotation;
  return j;
}

}  // namespace

SpecSet load_specs(std::istream& in, SpecFormat format) {
  return format == SpecFormat::json ? load_json(in) : load_csv(in);
}

SpecSet load_specs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file '" + path + "'");
  const auto dot = path.rfind('.');
  const auto ext = dot == std::string::npos ? std::string{} : lower(path.substr(dot + 1));
  return load_specs(in, ext == "csv" ? SpecFormat::csv : SpecFormat::json);
}

void write_specs(std::ostream& out, const SpecSet& specs, SpecFormat format) {
  if (format == SpecFormat::json) {
    json doc = json::object();
    doc["materials"] = json::array();
    doc["detectors"] = json::array();
    for (const auto& m : specs.materials) doc["materials"].push_back(material_to_json(m));
    for (const auto& d : specs.detectors) doc["detectors"].push_back(detector_to_json(d));
    out << doc.dump(2) << '\n';
    return;
  }
  if (!specs.materials.empty() && !specs.detectors.empty()) {
    throw std::invalid_argument("CSV output holds one record type; write materials and detectors separately");
  }
  if (!specs.materials.empty()) {
    out << join(kMaterialFields, ",") << '\n';
    for (const auto& m : specs.materials) {
      out << csv_escape(m.name) << ',' << format_number(m.band_gap_ev) << ',' << format_number(m.lambda_peak_nm)
          << ',' << format_number(m.material_qe) << ',' << format_number(m.refractive_index) << ','
          << format_number(m.normal_reflectivity) << ',' << format_number(m.brewster_angle_deg) << '\n';
    }
  } else if (!specs.detectors.empty()) {
    out << join(kDetectorFields, ",") << '\n';
    for (const auto& d : specs.detectors) {
      out << csv_escape(d.technology) << ',' << format_number(d.bandwidth_hz) << ','
          << (d.dark_count_rate_hz ? format_number(*d.dark_count_rate_hz) : std::string{}) << ','
          << format_number(d.operating_temp_k) << ',' << format_number(d.quantum_efficiency) << ','
          << format_number(d.excess_noise_factor) << ',' << format_number(d.dead_time_s) << ','
          << to_string(d.mode) << ',' << d.element_count << ',' << csv_escape(d.annotation) << '\n';
    }
  }
}

}  // namespace qedet
