// Exit-code matrix of the nullfold binary: every command against a passing,
// a failing, a misconfigured and a numerically breaking scenario.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "nullfold-test-cli";

std::string fixture(const std::string& name) { return std::string(NULLFOLD_FIXTURES) + "/" + name; }

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + NULLFOLD_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes a variant of a shipped fixture and returns its path.
std::string variant(const std::string& base, const std::string& name, const std::function<void(json&)>& edit) {
  json j = json::parse(slurp(fixture(base)));
  edit(j);
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::string out(const std::string& name) { return "--out \"" + (kWork / name).string() + "\""; }

}  // namespace

TEST_CASE("exit codes per command and outcome") {
  const std::string pass = fixture("pp-wave.json");
  const std::string missing = (kWork / "missing.json").string();
  const std::string timelike = fixture("timelike.json");
  const std::string failing = variant("pp-wave.json", "failing.json", [](json& j) {
    j["oracles"]["theta"] = "1";  // the front is totally geodesic, θ = 0
  });
  const std::string breaking = variant("grw-counterexample.json", "breaking.json", [](json& j) {
    j["grid"].erase("t_map");  // generators run into t = 0
    j["grid"]["t_min"] = -2;
    j["grid"]["t_max"] = 0.5;
    j["grid"]["t_steps"] = 20;
  });

  for (const char* cmd : {"analyze", "build", "volumes", "verify"}) {
    CAPTURE(cmd);
    const std::string c = cmd;
    CHECK(run(c + " \"" + pass + "\" " + out("pass")) == 0);
    CHECK(run(c + " \"" + missing + "\" " + out("missing")) == 2);
    CHECK(run(c + " \"" + timelike + "\" " + out("timelike")) == 2);
    CHECK(run(c + " \"" + pass + "\" --tol nonexistent=1 " + out("badtol")) == 2);
    CHECK(run(c + " \"" + pass + "\" --tol frame_algebra=abc " + out("badtol")) == 2);
    CHECK(run(c + " \"" + pass + "\" --bogus-flag " + out("badflag")) == 2);
  }
  // θ oracle and generator breakdown only matter for the stages that use them.
  CHECK(run("analyze \"" + failing + "\" " + out("f")) == 0);
  CHECK(run("build \"" + failing + "\" " + out("f")) == 1);
  CHECK(run("verify \"" + failing + "\" " + out("f")) == 1);
  CHECK(run("analyze \"" + breaking + "\" " + out("b")) == 0);
  CHECK(run("build \"" + breaking + "\" " + out("b")) == 3);
  CHECK(run("volumes \"" + breaking + "\" " + out("b")) == 3);
  CHECK(run("verify \"" + breaking + "\" " + out("b")) == 3);
  CHECK(run("verify") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("--tol overrides the scenario tolerance") {
  const std::string pass = fixture("pp-wave.json");
  CHECK(run("build \"" + pass + "\" --tol theta_profile=1e-3 " + out("tol")) == 0);
  const json r = json::parse(slurp(kWork / "tol" / "report.json"));
  bool found = false;
  for (const auto& e : r["entries"])
    if (e["check"] == "theta_profile") {
      found = true;
      CHECK(e["tolerance"] == 1e-3);
    }
  CHECK(found);
}

TEST_CASE("volumes writes the volume series; the cone leaf at t = 1 has area 16π") {
  CHECK(run("volumes \"" + fixture("minkowski-cone.json") + "\" --grid 8 --t-steps 14 " + out("vol")) == 0);
  std::ifstream in(kWork / "vol" / "volumes.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,Vol,Vol_pred1,Vol_pred2,Theta");
  bool seen = false;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    REQUIRE(row.size() == 5);
    if (row[0] == 1.0) {
      seen = true;
      const double ref = 16 * 3.14159265358979323846;
      for (int k = 1; k <= 3; ++k) CHECK(std::abs(row[k] - ref) / ref < 1e-4);
      CHECK(row[1] == doctest::Approx(50.265).epsilon(1e-4));
    }
  }
  CHECK(seen);
}

TEST_CASE("--reproducible output is byte-identical across runs and thread counts") {
  const std::string sc = fixture("grw-counterexample.json");
  CHECK(run("verify \"" + sc + "\" --reproducible --threads 1 " + out("r1")) == 0);
  CHECK(run("verify \"" + sc + "\" --reproducible --threads 1 " + out("r2")) == 0);
  CHECK(run("verify \"" + sc + "\" --reproducible --threads 8 " + out("r8")) == 0);
  for (const auto& entry : fs::directory_iterator(kWork / "r1")) {
    const auto name = entry.path().filename();
    CAPTURE(name.string());
    CHECK(slurp(kWork / "r1" / name) == slurp(kWork / "r2" / name));
    CHECK(slurp(kWork / "r1" / name) == slurp(kWork / "r8" / name));
  }
  CHECK(!fs::exists(kWork / "r1" / "report.meta.json"));
  CHECK(run("verify \"" + sc + "\" " + out("stamped")) == 0);
  CHECK(fs::exists(kWork / "stamped" / "report.meta.json"));
}
