#pragma once

// The property suite: a registry of named checks, each producing one residual
// that is compared with a tolerance (scenario override or the default below).
// Checks run in stage order; a check whose prerequisite failed is skipped.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nullfold/scenario.hpp"

namespace nullfold {

enum class Stage { Frames, Forms, Shear, Hypersurface, Omega, Volumes, Jacobi, Invariance };
const char* stage_name(Stage stage);

enum class Status { Pass, Fail, Skipped };
const char* status_name(Status status);

// AtMost: pass ⇔ residual ≤ tolerance. AtLeast (lower bounds such as
// max |θ_U|): pass ⇔ residual ≥ tolerance.
enum class Comparison { AtMost, AtLeast };

struct CheckInfo {
  std::string name;
  Stage stage;
  std::vector<std::string> prerequisites;
  double tolerance;
  Comparison comparison = Comparison::AtMost;
  std::vector<std::string> covers;  // invariant ids, "module/name"
  std::string summary;
};

// In execution order.
const std::vector<CheckInfo>& check_registry();
const CheckInfo* find_check(const std::string& name);

struct CheckEntry {
  std::string check, fixture;
  Stage stage = Stage::Frames;
  double residual = 0, tolerance = 0;
  Comparison comparison = Comparison::AtMost;
  Status status = Status::Skipped;
  std::vector<std::string> series;  // file names of the supporting series
  std::string note;
};

// long: rows of (t, node coordinates…, value); wide: one column per quantity.
struct Series {
  std::string name;
  bool long_format = false;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string file() const { return name + ".csv"; }
};

struct CheckReport {
  std::string scenario;
  std::vector<CheckEntry> entries;
  nlohmann::ordered_json environment;
  std::vector<Series> series;
  bool numerical_failure = false;  // an integration broke down

  bool all_pass() const;
  const CheckEntry* find(const std::string& check) const;
};

// Checks that apply to the scenario (oracles, transformations and chart
// compactness decide), in registry order, restricted to the given stages.
std::vector<std::string> applicable_checks(const Scenario& scenario, const std::vector<Stage>& stages);

// Empty `selected` runs nothing. Configuration errors propagate; numerical
// errors inside a check mark it failed and set numerical_failure.
CheckReport run_property_suite(const Scenario& scenario, const std::vector<std::string>& selected);

// The scenario's own check list, or every applicable check.
CheckReport run_property_suite(const Scenario& scenario);

}  // namespace nullfold
