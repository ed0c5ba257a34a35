#pragma once

// Scenario files: JSON with "version": 1. Unknown keys are rejected at every
// level so that a misspelt tolerance name cannot silently fall back to its
// default.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nullfold/catalog.hpp"
#include "nullfold/hypersurface.hpp"
#include "nullfold/ode.hpp"
#include "nullfold/quadrature.hpp"
#include "nullfold/submanifold.hpp"

namespace nullfold {

inline constexpr int kScenarioVersion = 1;

struct GridSpec {
  std::vector<int> counts;  // nodes per chart parameter
  double t_min = -0.5, t_max = 1.0;
  int t_steps = 40;
  // Optional map q ↦ t for the generator parameter: nodes are t_map(q_k) with
  // q_k uniform on [t_min, t_max], then 0 is added.
  std::optional<std::string> t_map;
};

struct Transformations {
  std::vector<std::string> rescale;   // f in the chart parameters
  std::optional<std::string> conformal;  // u in the ambient coordinates
};

// Closed-form reference values. Profile expressions may use the ambient
// coordinates and "lam", the generator parameter.
struct Oracles {
  std::optional<std::string> theta, mu, omega;
  std::optional<std::string> volume;  // in "lam" only
  std::optional<double> chi, theta_xi, gHH;
  std::optional<std::vector<std::vector<double>>> A_xi;
  double relative_floor = 1e-3;       // |x − ref| / max(|ref|, floor)
  bool totally_geodesic = false;      // enables the B ≡ 0, Ω ≡ 1 family
  bool not_totally_geodesic = false;  // enables the lower bound on max |θ_U|
};

struct Scenario {
  std::string id, description;
  std::string source;  // file path or "<memory>"
  SpacetimeSpec spacetime;
  std::vector<ChartParameter> chart;
  std::vector<std::string> map;
  FrameOptions frame;
  GridSpec grid;
  std::optional<Window> window;
  std::map<std::string, double> tolerances;
  std::optional<std::vector<std::string>> checks;
  Transformations transformations;
  Oracles oracles;
  IntegratorControls integrator = geodesic_integrator_defaults();
  std::uint64_t seed = 1;
};

// Throws Error(Configuration) with "<source>: <key path>: message".
Scenario parse_scenario(const std::string& text, const std::string& source = "<memory>");
Scenario load_scenario(const std::string& path);

// Instantiated objects shared by every command.
struct ResolvedScenario {
  Spacetime spacetime;
  Embedding embedding;
  ChartGrid grid;
  std::vector<double> t;  // generator parameter grid, ascending, contains 0
};

// Errors keep their kind and gain the scenario location in the message.
ResolvedScenario resolve_scenario(const Scenario& scenario);

std::vector<double> scenario_t_grid(const Scenario& scenario);

}  // namespace nullfold
