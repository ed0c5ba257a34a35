#pragma once

// Shared helpers for the test binaries: seeded generators and small
// independent oracles that do not go through the library's jet path.

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  // Random well-conditioned expression over `vars`; values stay moderate on [-1,1].
  std::string expression(const std::vector<std::string>& vars, int depth) {
    if (depth <= 0 || integer(0, 5) == 0) {
      if (coin()) return vars[integer(0, static_cast<int>(vars.size()) - 1)];
      const int k = integer(1, 9);
      return coin() ? std::to_string(k) : std::to_string(k) + ".5";
    }
    switch (integer(0, 9)) {
      case 0: return "(" + expression(vars, depth - 1) + " + " + expression(vars, depth - 1) + ")";
      case 1: return "(" + expression(vars, depth - 1) + " - " + expression(vars, depth - 1) + ")";
      case 2: return expression(vars, depth - 1) + "*" + expression(vars, depth - 1);
      case 3: return "(" + expression(vars, depth - 1) + ")/(2 + (" + expression(vars, depth - 1) + ")^2)";
      case 4: return "sin(" + expression(vars, depth - 1) + ")";
      case 5: return "cos(" + expression(vars, depth - 1) + ")";
      case 6: return "exp(" + expression(vars, depth - 1) + "/10)";
      case 7: return "sqrt(1 + (" + expression(vars, depth - 1) + ")^2)";
      case 8: return "-" + expression(vars, depth - 1);
      default: return "tanh(" + expression(vars, depth - 1) + ")^2";
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Plain central difference with the usual ε^{1/3} step.
template <class F>
double central_difference(F&& f, std::vector<double> x, int i) {
  const double h = std::max(std::abs(x[i]), 1.0) * std::cbrt(2.220446049250313e-16);
  std::vector<double> xp = x, xm = x;
  xp[i] += h;
  xm[i] -= h;
  return (f(xp) - f(xm)) / (xp[i] - xm[i]);
}

inline double rel_err(double a, double ref, double floor = 1e-300) {
  return std::abs(a - ref) / std::max(std::abs(ref), floor);
}

}  // namespace testsupport
