#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nullfold {

struct ChartParameter {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  bool periodic = false;
  bool pole = false;  // both ends of the range are coordinate poles (sphere latitude)
};

struct Window {
  std::vector<double> lo, hi;  // one entry per chart parameter
};

// Tensor-product node set over a chart, with quadrature weights for dμ = du¹…duⁿ
// (the √det h factor is applied by the caller).
struct ChartGrid {
  std::vector<int> counts;
  std::vector<std::vector<double>> axes;           // node coordinates per parameter
  std::vector<std::vector<double>> axis_weights;
  std::vector<bool> axis_periodic;
  std::vector<std::vector<double>> nodes;          // row-major over axes, last axis fastest
  std::vector<double> weights;
  bool compact = false;   // every axis periodic or pole-bounded
  bool windowed = false;

  std::size_t size() const { return nodes.size(); }
  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  // Neighbour along `axis` (+1/−1); nullopt at a non-periodic edge.
  std::optional<std::size_t> neighbor(std::size_t flat, int axis, int step) const;
};

// Periodic axes: uniform nodes, equal weights. Pole axes: Gauss–Legendre
// (no node touches a pole). Other axes: trapezoid including the endpoints,
// over the window when one is given.
ChartGrid make_chart_grid(const std::vector<ChartParameter>& chart, const std::vector<int>& counts,
                          const std::optional<Window>& window = std::nullopt);

// Gauss–Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

// Finite-difference weights (Fornberg) for derivative `order` at x0 from nodes x.
std::vector<double> fd_weights(double x0, const std::vector<double>& x, int order);

// Cumulative ∫_{t_ref}^{t_k} f dt on an ascending, possibly non-uniform grid
// using local cubic interpolation on each interval; t_ref must be a grid node.
std::vector<double> cumulative_integral(const std::vector<double>& t, const std::vector<double>& f,
                                        std::size_t ref);

// Same with the derivative df known at the nodes: cubic Hermite on each interval.
std::vector<double> cumulative_integral(const std::vector<double>& t, const std::vector<double>& f,
                                        const std::vector<double>& df, std::size_t ref);

// Derivative of sampled f at every node from a local five-point stencil.
std::vector<double> sampled_derivative(const std::vector<double>& t, const std::vector<double>& f);

}  // namespace nullfold
