#include <algorithm>
#include <cmath>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "nullfold/error.hpp"
#include "nullfold/scenario.hpp"
#include "support.hpp"

using namespace nullfold;
using nlohmann::json;
using testsupport::Gen;

namespace {

json plane_doc() {
  return json::parse(R"({
    "version": 1,
    "id": "plane",
    "spacetime": {"kind": "minkowski", "dim": 4},
    "submanifold": {
      "chart": [{"name": "a", "min": 0, "max": 1}, {"name": "b", "min": 0, "max": 1}],
      "map": ["0", "a", "b", "0"],
      "branch_vector": [0, 0, 0, 1]
    },
    "grid": {"counts": [3, 3], "t_min": -1, "t_max": 1, "t_steps": 4},
    "window": {"lo": [0, 0], "hi": [1, 1]}
  })");
}

// The configuration message, or "" when parsing succeeded.
std::string rejection(const json& doc) {
  try {
    parse_scenario(doc.dump(), "case.json");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Configuration);
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

std::string fixture(const std::string& name) { return std::string(NULLFOLD_FIXTURES) + "/" + name; }

}  // namespace

TEST_CASE("a minimal scenario parses with defaults") {
  const Scenario sc = parse_scenario(plane_doc().dump());
  CHECK(sc.id == "plane");
  CHECK(sc.chart.size() == 2);
  CHECK(sc.map.size() == 4);
  CHECK(sc.grid.counts == std::vector<int>{3, 3});
  CHECK(sc.window.has_value());
  CHECK(!sc.checks.has_value());
  CHECK(sc.tolerances.empty());
  CHECK(sc.seed == 1);
}

TEST_CASE("unknown keys are rejected at every level with their path") {
  json d = plane_doc();
  d["tolerence"] = json::object();
  CHECK(contains(rejection(d), "unknown key 'tolerence'"));

  d = plane_doc();
  d["grid"]["tsteps"] = 3;
  const std::string m = rejection(d);
  CHECK(contains(m, "case.json"));
  CHECK(contains(m, "grid"));
  CHECK(contains(m, "tsteps"));

  d = plane_doc();
  d["submanifold"]["chart"][1]["perodic"] = true;
  CHECK(contains(rejection(d), "perodic"));

  d = plane_doc();
  d["oracles"] = {{"thta", "0"}};
  CHECK(contains(rejection(d), "thta"));
}

TEST_CASE("misspelt tolerance and check names are rejected") {
  json d = plane_doc();
  d["tolerances"] = {{"frame_algebr", 1e-9}};
  CHECK(contains(rejection(d), "unknown check 'frame_algebr'"));

  d = plane_doc();
  d["tolerances"] = {{"frame_algebra", -1.0}};
  CHECK(contains(rejection(d), "non-negative"));

  d = plane_doc();
  d["checks"] = {"frame_algebra", "frame_algebra"};
  CHECK(contains(rejection(d), "listed twice"));

  d = plane_doc();
  d["checks"] = {"no_such_check"};
  CHECK(contains(rejection(d), "no_such_check"));
}

TEST_CASE("version field is required and must be 1") {
  json d = plane_doc();
  d.erase("version");
  CHECK(contains(rejection(d), "version"));
  d["version"] = 2;
  CHECK(contains(rejection(d), "unsupported scenario version"));
}

TEST_CASE("bad expressions report the key and the offset") {
  json d = plane_doc();
  d["submanifold"]["map"][2] = "b + * 2";
  const std::string m = rejection(d);
  CHECK(contains(m, "map"));
  CHECK(contains(m, "offset"));

  d = plane_doc();
  d["submanifold"]["chart"][0]["max"] = "pi + a";
  CHECK(contains(rejection(d), "constant"));
}

TEST_CASE("empty ranges and mismatched sizes are rejected") {
  json d = plane_doc();
  d["submanifold"]["chart"][0]["max"] = 0;
  CHECK(contains(rejection(d), "range is empty"));

  d = plane_doc();
  d["grid"]["counts"] = {3};
  CHECK(contains(rejection(d), "one count per chart parameter"));

  d = plane_doc();
  d["window"]["hi"] = {1, 0};
  CHECK(contains(rejection(d), "window range is empty"));

  d = plane_doc();
  d["grid"]["t_max"] = -2;
  CHECK(contains(rejection(d), "t range is empty"));

  d = plane_doc();
  d["submanifold"]["chart"][0]["periodic"] = true;
  d["submanifold"]["chart"][0]["pole"] = true;
  CHECK(contains(rejection(d), "both periodic and a pole"));
}

TEST_CASE("invalid JSON and missing files are configuration errors") {
  CHECK_THROWS_AS(parse_scenario("{\"version\": 1,"), Error);
  try {
    load_scenario(fixture("does-not-exist.json"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.is_configuration());
    CHECK(contains(e.what(), "does-not-exist.json"));
  }
}

TEST_CASE("property: inserting any unknown key anywhere is rejected") {
  Gen gen(31);
  const std::vector<std::vector<std::string>> spots = {
      {}, {"spacetime"}, {"submanifold"}, {"grid"}, {"window"}};
  for (int trial = 0; trial < 60; ++trial) {
    json d = plane_doc();
    const auto& path = spots[gen.integer(0, static_cast<int>(spots.size()) - 1)];
    json* at = &d;
    for (const auto& k : path) at = &(*at)[k];
    std::string key = "x";
    for (int k = gen.integer(2, 8); k > 0; --k) key += static_cast<char>('a' + gen.integer(0, 25));
    key += "_";
    (*at)[key] = gen.uniform(-1, 1);
    const std::string m = rejection(d);
    CHECK_MESSAGE(contains(m, "unknown key '" + key + "'"), m);
  }
}

TEST_CASE("property: random valid grids produce sorted t grids that contain 0") {
  Gen gen(32);
  for (int trial = 0; trial < 50; ++trial) {
    json d = plane_doc();
    const double lo = -gen.uniform(0.0, 2.0), hi = gen.uniform(0.01, 2.0);
    const int steps = gen.integer(1, 60);
    d["grid"]["t_min"] = lo;
    d["grid"]["t_max"] = hi;
    d["grid"]["t_steps"] = steps;
    const auto t = scenario_t_grid(parse_scenario(d.dump()));
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(std::adjacent_find(t.begin(), t.end()) == t.end());
    CHECK(std::count(t.begin(), t.end(), 0.0) == 1);
    CHECK(t.front() == doctest::Approx(lo));
    CHECK(t.back() == doctest::Approx(hi));
  }
}

TEST_CASE("a t map samples the mapped parameter and adds 0") {
  json d = plane_doc();
  d["grid"] = {{"counts", {3, 3}}, {"t_min", "exp(-1) + 0.05"}, {"t_max", "exp(1) - 0.05"},
               {"t_steps", 10}, {"t_map", "(q^2 - 1)/2"}};
  const auto t = scenario_t_grid(parse_scenario(d.dump()));
  CHECK(t.size() == 12);  // 11 mapped nodes plus 0 (q = 1 is not a node)
  CHECK(t.front() == doctest::Approx((std::pow(std::exp(-1.0) + 0.05, 2) - 1) / 2));
  CHECK(t.back() == doctest::Approx((std::pow(std::exp(1.0) - 0.05, 2) - 1) / 2));
  CHECK(std::count(t.begin(), t.end(), 0.0) == 1);
}

TEST_CASE("every shipped fixture loads; only the timelike one fails to resolve") {
  for (const char* name : {"minkowski-cone.json", "minkowski-cone-conformal.json", "grw-counterexample.json",
                           "plane.json", "nonround-cone.json", "pp-wave.json"}) {
    CAPTURE(name);
    const Scenario sc = load_scenario(fixture(name));
    const ResolvedScenario r = resolve_scenario(sc);
    CHECK(!r.grid.nodes.empty());
    CHECK(std::count(r.t.begin(), r.t.end(), 0.0) == 1);
  }
  const Scenario sc = load_scenario(fixture("timelike.json"));
  try {
    resolve_scenario(sc);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotSpacelike);
    CHECK(e.is_configuration());
    CHECK(contains(e.what(), "timelike.json"));
  }
}
