#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "qedet/format.hpp"
#include "qedet/tradespace.hpp"

namespace qedet {

namespace {

using nlohmann::ordered_json;

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

template <typename T>
void read_opt(const ordered_json& j, const char* key, T& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

template <typename T>
void read_opt(const ordered_json& j, const char* key, std::optional<T>& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

}  // namespace

SweepSpec read_sweep_spec(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed sweep spec: ") + e.what());
  }
  SweepSpec s;
  try {
    s.variable = sweep_variable_from_string(j.at("variable").get<std::string>());
    s.grid = j.at("grid").get<std::vector<double>>();
    for (const auto& m : j.at("outputs")) s.outputs.push_back(sweep_metric_from_string(m.get<std::string>()));
    if (j.contains("fixed")) {
      const auto& f = j["fixed"];
      auto& c = s.fixed;
      read_opt(f, "eta_col", c.stages.eta_col);
      read_opt(f, "eta_abs", c.stages.eta_abs);
      read_opt(f, "eta_pe", c.stages.eta_pe);
      read_opt(f, "eta_mul", c.stages.eta_mul);
      read_opt(f, "trap_detectors", c.stages.trap_detectors);
      if (f.contains("geometry")) {
        const auto g = f["geometry"].get<std::string>();
        if (g != "retro" && g != "linear") throw std::invalid_argument("geometry must be retro or linear");
        c.stages.geometry = g == "retro" ? TrapGeometryKind::retro : TrapGeometryKind::linear;
      }
      read_opt(f, "fano", c.fano);
      read_opt(f, "photons", c.photons);
      read_opt(f, "dark_rate", c.dark_rate);
      read_opt(f, "dead_time", c.dead_time);
      read_opt(f, "photon_flux", c.photon_flux);
      read_opt(f, "margin", c.margin);
      read_opt(f, "n_elements", c.n_elements);
      read_opt(f, "alpha", c.alpha);
    }
  } catch (const ordered_json::exception& e) {
    throw std::invalid_argument(std::string("invalid sweep spec: ") + e.what());
  }
  validate(s);
  return s;
}

void write_sweep_spec(std::ostream& out, const SweepSpec& s) {
  ordered_json j;
  j["variable"] = to_string(s.variable);
  j["grid"] = s.grid;
  const auto& c = s.fixed;
  ordered_json f;
  f["eta_col"] = c.stages.eta_col;
  f["eta_abs"] = c.stages.eta_abs;
  f["eta_pe"] = c.stages.eta_pe;
  f["eta_mul"] = c.stages.eta_mul;
  f["trap_detectors"] = c.stages.trap_detectors;
  f["geometry"] = to_string(c.stages.geometry);
  f["fano"] = c.fano;
  f["photons"] = c.photons;
  f["dark_rate"] = c.dark_rate ? ordered_json(*c.dark_rate) : ordered_json(nullptr);
  f["dead_time"] = c.dead_time ? ordered_json(*c.dead_time) : ordered_json(nullptr);
  f["photon_flux"] = c.photon_flux ? ordered_json(*c.photon_flux) : ordered_json(nullptr);
  f["margin"] = c.margin;
  f["n_elements"] = c.n_elements;
  f["alpha"] = c.alpha;
  j["fixed"] = f;
  j["outputs"] = ordered_json::array();
  for (auto m : s.outputs) j["outputs"].push_back(to_string(m));
  out << j.dump(2) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepTable& t) {
  out << to_string(t.variable);
  for (auto m : t.outputs) out << ',' << to_string(m);
  out << ",error\n";
  for (const auto& row : t.rows) {
    out << format_number(row.value);
    for (const auto& v : row.metrics) {
      out << ',';
      if (v) out << format_number(*v);
    }
    out << ',' << csv_cell(row.error) << '\n';
  }
}

}  // namespace qedet
