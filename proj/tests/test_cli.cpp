#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "qedet/cli.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = qedet::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json invoke_json(std::vector<std::string> args) {
  args.insert(args.begin(), {"--format", "json"});
  const auto r = invoke(args);
  REQUIRE(r.code == 0);
  return nlohmann::json::parse(r.out);
}

void flatten(const nlohmann::json& j, const std::string& path, std::map<std::string, double>& numbers) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(*it, path.empty() ? it.key() : path + "." + it.key(), numbers);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", numbers);
  } else if (j.is_number()) {
    numbers[path] = j.get<double>();
  }
}

std::map<std::string, std::string> text_lines(const std::string& text) {
  std::map<std::string, std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon != std::string::npos) lines[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return lines;
}

// Every numeric JSON leaf appears as a text line holding the same double.
void check_text_matches_json(const std::vector<std::string>& args) {
  std::map<std::string, double> numbers;
  flatten(invoke_json(args), "", numbers);
  REQUIRE_FALSE(numbers.empty());
  const auto text = invoke(args);
  REQUIRE(text.code == 0);
  const auto lines = text_lines(text.out);
  for (const auto& [path, value] : numbers) {
    INFO(path);
    REQUIRE(lines.count(path) == 1);
    CHECK(std::strtod(lines.at(path).c_str(), nullptr) == value);
  }
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_CASE("budget total") {
  const auto j = invoke_json({"budget", "--eta-col", "0.999", "--eta-abs", "0.69", "--trap-n", "3", "--eta-pe", "0.99",
                              "--eta-mul", "1"});
  CHECK(j["total_qe"].get<double>() == doctest::Approx(0.98617854834).epsilon(1e-10));
  CHECK(j["eta_eff_abs"].get<double>() == doctest::Approx(0.9971370849).epsilon(1e-10));
  CHECK(j["parameters"]["eta_col"] == 0.999);
  CHECK(j["parameters"]["trap_detectors"] == 3);
  CHECK(j["parameters"]["geometry"] == "retro");
}

TEST_CASE("budget without flags is a usage error") {
  const auto r = invoke({"budget"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"budget", "--eta-col", "1.5", "--eta-abs", "0.5", "--eta-pe", "0.5"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("budget rate bracket and dark adjustment") {
  const auto infeasible = invoke({"--format", "json", "budget", "--eta-col", "1", "--eta-abs", "0.94", "--eta-pe", "1",
                                  "--dark-rate", "2e4", "--flux", "1e7", "--dead-time", "3.33e-9"});
  CHECK(infeasible.code == 1);
  const auto j = nlohmann::json::parse(infeasible.out);
  CHECK(j["dark_adjusted_qe"].get<double>() == doctest::Approx(0.938).epsilon(1e-12));
  CHECK(j["rate_bracket"]["feasible"] == false);
  const auto r = invoke({"budget", "--eta-col", "1", "--eta-abs", "0.94", "--eta-pe", "1", "--dark-rate", "2e4",
                         "--flux", "1e7", "--dead-time", "3.33e-9"});
  CHECK(r.code == 1);
}

TEST_CASE("budget from optical power") {
  const auto j = invoke_json(
      {"budget", "--eta-col", "1", "--eta-abs", "1", "--eta-pe", "1", "--power", "1e-12", "--wavelength", "800e-9"});
  CHECK(j["photon_flux"].get<double>() == doctest::Approx(4.0272932540e6).epsilon(1e-10));
}

TEST_CASE("snr report") {
  const auto j = invoke_json({"snr", "--eta", "0.9", "--n", "1e6"});
  CHECK(j["classical"].get<double>() == doctest::Approx(948.683298050514).epsilon(1e-12));
  CHECK(j["correlated"]["approx"].get<double>() == doctest::Approx(3000.0).epsilon(1e-12));
  const auto& imp = j["improvement"]["correlated_approx_over_classical"];
  CHECK(imp["db_amplitude"].get<double>() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(imp["db_power"].get<double>() == doctest::Approx(5.0).epsilon(1e-12));

  const auto bound = invoke_json({"snr", "--eta", "0.99", "--n", "1e6", "--target-improvement", "4"});
  CHECK(bound["squeezing_bound"]["max_fano"].get<double>() == doctest::Approx(0.0523989898989899).epsilon(1e-12));
  CHECK(invoke({"snr", "--eta", "0.9", "--n", "1e6", "--target-improvement", "4"}).code == 1);
}

TEST_CASE("text and JSON outputs carry identical numbers") {
  check_text_matches_json({"budget", "--eta-col", "0.999", "--eta-abs", "0.69", "--trap-n", "3", "--eta-pe", "0.99",
                           "--dark-rate", "25", "--flux", "1e9", "--dead-time", "1e-9"});
  check_text_matches_json({"snr", "--eta", "0.9", "--n", "1e6", "--fano", "0.5"});
  check_text_matches_json({"simulate", "--source", "fano", "--n", "500", "--fano", "0.3", "--eta", "0.7", "--gain",
                           "exp:20", "--windows", "500", "--seed", "5"});
  check_text_matches_json({"confidence", "--n-elements", "100", "--eta", "0.9", "--alpha", "1"});
  check_text_matches_json({"trap", "--eta-abs", "0.69", "--n", "3", "--target", "0.9999", "--paths", "1,2,3", "--geometry", "linear"});
  check_text_matches_json({"noise", "--shot", "4", "--dark", "1", "--stray", "1", "--other", "1"});
  check_text_matches_json({"enf", "--mean-gain", "50", "--mean-square-gain", "5000"});
}

TEST_CASE("simulate output is reproducible for a seed") {
  const std::vector<std::string> args{"--format", "json", "simulate", "--source", "poisson", "--n", "1000",
                                      "--eta", "0.8", "--dark", "0.5", "--dead-time", "0.0001", "--gain", "exp:10",
                                      "--windows", "3000", "--seed", "42"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  auto threaded = args;
  threaded.insert(threaded.end(), {"--threads", "7"});
  CHECK(invoke(threaded).out == a.out);
  auto other = args;
  other.back() = "43";
  CHECK(invoke(other).out != a.out);
}

TEST_CASE("simulate reports prediction alongside counts") {
  const auto j = invoke_json({"simulate", "--source", "deterministic", "--n", "1e4", "--eta", "0.9", "--windows",
                              "10000", "--seed", "1"});
  CHECK(j["counts"]["fano"].get<double>() == doctest::Approx(0.1).epsilon(0.1));
  CHECK(j["prediction"]["fano"].get<double>() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(j["prediction"]["fano_deviation_se"].get<double>()) < 5.0);
  CHECK(invoke({"simulate", "--gain", "weird:3"}).code == 2);
}

TEST_CASE("sweep CSV output") {
  const auto r = invoke({"sweep", "--variable", "trap_detectors", "--grid", "1,2,3", "--metrics", "eta_eff_abs",
                         "--eta-abs", "0.69"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string header, row1, row2, row3;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  std::getline(in, row3);
  CHECK(header == "trap_detectors,eta_eff_abs,error");
  CHECK(row1.rfind("1,0.68999999999999995,", 0) == 0);
  CHECK(row3.rfind("3,0.99713708489999997,", 0) == 0);
  CHECK(invoke({"sweep", "--variable", "eta_pe", "--grid", "0.5", "--metrics", ""}).code == 2);
}

TEST_CASE("sweep from a spec file") {
  const auto spec = temp_file("qedet_sweep_spec.json",
                              R"({"variable": "eta_pe", "grid": [0.5, 0.9, 0.99], "fixed": {},
                                  "outputs": ["correlated_improvement"]})");
  const auto r = invoke({"sweep", "--spec", spec.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("0.98999999999999999,9.99999999999999") != std::string::npos);
  std::filesystem::remove(spec);
}

TEST_CASE("validate exit codes") {
  const auto r = invoke({"validate"});
  CHECK(r.code == 0);
  CHECK(r.out.find("InGaAs") != std::string::npos);
  CHECK(r.out.find("brewster_angle") != std::string::npos);

  const auto bad = temp_file("qedet_bad_specs.json",
                             R"({"detectors": [{"technology": "X", "bandwidth": 1e9, "operating_temp": 4,
                                 "quantum_efficiency": 1.3}]})");
  const auto rb = invoke({"validate", "--specs", bad.string()});
  CHECK(rb.code == 1);
  CHECK(rb.err.find("quantum_efficiency") != std::string::npos);
  std::filesystem::remove(bad);

  const auto broken = temp_file("qedet_broken_specs.json", "{\"materials\": [");
  CHECK(invoke({"validate", "--specs", broken.string()}).code == 1);
  std::filesystem::remove(broken);
}

TEST_CASE("checklist exit codes") {
  CHECK(invoke({"checklist", "--detector", "VLPC", "--eta-col", "0.9995", "--eta-abs", "0.94", "--eta-pe", "1",
                "--trap-n", "3", "--count-rate", "1e8"})
            .code == 1);
  const auto j = invoke({"--format", "json", "checklist", "--detector", "SSPD", "--eta-col", "0.9995", "--eta-abs",
                         "0.9", "--eta-pe", "0.99", "--trap-n", "3", "--count-rate", "1e4"});
  CHECK(j.code == 0);
  const auto report = nlohmann::json::parse(j.out);
  CHECK(report["all_pass"] == true);
  CHECK(invoke({"checklist", "--detector", "PMT", "--eta-col", "1", "--eta-abs", "1", "--eta-pe", "1"}).code == 1);
  CHECK(invoke({"checklist", "--detector", "nonesuch", "--eta-col", "1", "--eta-abs", "1", "--eta-pe", "1"}).code != 0);
}

TEST_CASE("trap exit codes and delays") {
  const auto j = invoke_json({"trap", "--eta-abs", "0.69", "--target", "0.9999", "--paths", "1,2,3", "--geometry", "linear"});
  CHECK(j["min_trap_detectors"] == 8);  // one encounter per detector
  CHECK(invoke_json({"trap", "--eta-abs", "0.69", "--target", "0.9999"})["min_trap_detectors"] == 5);
  CHECK(j["delays"][0].get<double>() == doctest::Approx(6.6712819e-9).epsilon(1e-7));
  CHECK(invoke({"trap", "--eta-abs", "0.69", "--paths", "1,2,3", "--geometry", "retro"}).code == 1);
  CHECK(invoke({"trap", "--eta-abs", "0.69", "--paths", "3,2,1", "--geometry", "linear"}).code == 1);
  CHECK(invoke({"trap"}).code == 2);
}

TEST_CASE("manifest is written separately") {
  const auto path = std::filesystem::temp_directory_path() / "qedet_manifest_test.json";
  std::filesystem::remove(path);
  const auto r = invoke({"--manifest", path.string(), "simulate", "--source", "poisson", "--n", "10", "--eta", "0.5",
                         "--windows", "100", "--seed", "9"});
  REQUIRE(r.code == 0);
  std::ifstream in(path);
  const auto m = nlohmann::json::parse(in);
  CHECK(m["command"] == "simulate");
  CHECK(m["seed"] == 9);
  CHECK(m.contains("version"));
  CHECK(m.contains("timestamp"));
  CHECK(m["parameters"]["windows"] == 100);
  std::filesystem::remove(path);
}
