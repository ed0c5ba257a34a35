#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nullfold/metric.hpp"

namespace nullfold {

struct SpacetimeSpec {
  std::string kind = "minkowski";  // minkowski | grw_twisted | pp_wave | conformal | explicit
  int dim = 4;
  // Kind-specific expressions: "f" and "delta" (grw_twisted), "H" (pp_wave), "u" (conformal).
  std::map<std::string, std::string> fields;
  // Named constants substituted into the field expressions before binding.
  std::map<std::string, std::string> constants;
  double t0 = 1.0;  // grw_twisted: reference time; domain t ∈ (t0/e, t0·e)
  std::vector<std::string> coordinates;               // explicit
  std::vector<std::vector<std::string>> components;   // explicit
  std::shared_ptr<SpacetimeSpec> base;                // conformal
  std::optional<std::vector<Interval>> domain;
  std::optional<double> constant_curvature;
};

struct Spacetime {
  MetricPtr metric;
  std::vector<std::string> warnings;
};

inline constexpr std::uint64_t kProbeSeed = 0x5eedf00dULL;
inline constexpr int kProbeCount = 20;

Spacetime instantiate_spacetime(const SpacetimeSpec& spec);

// Uniform random points in the metric's declared domain (deterministic).
std::vector<Point> probe_points(const MetricField& metric, int count, std::uint64_t seed);

// Number of negative, zero, positive eigenvalues of g at p.
struct SignatureCount {
  int negative = 0, zero = 0, positive = 0;
};
SignatureCount signature_at(const MetricField& metric, const Point& p);

}  // namespace nullfold
