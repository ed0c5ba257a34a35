#include "nullfold/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "nullfold/error.hpp"

namespace nullfold {

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = mid - half * z;
    x[n - 1 - i] = mid + half * z;
    w[i] = w[n - 1 - i] = half * wi;
  }
}

std::vector<int> ChartGrid::multi_index(std::size_t flat) const {
  std::vector<int> idx(counts.size());
  for (int a = static_cast<int>(counts.size()) - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % counts[a]);
    flat /= counts[a];
  }
  return idx;
}

std::size_t ChartGrid::flat_index(const std::vector<int>& idx) const {
  std::size_t f = 0;
  for (std::size_t a = 0; a < counts.size(); ++a) f = f * counts[a] + idx[a];
  return f;
}

std::optional<std::size_t> ChartGrid::neighbor(std::size_t flat, int axis, int step) const {
  auto idx = multi_index(flat);
  int k = idx[axis] + step;
  if (k < 0 || k >= counts[axis]) {
    if (!axis_periodic[axis]) return std::nullopt;
    k = (k + counts[axis]) % counts[axis];
  }
  idx[axis] = k;
  return flat_index(idx);
}

ChartGrid make_chart_grid(const std::vector<ChartParameter>& chart, const std::vector<int>& counts,
                          const std::optional<Window>& window) {
  if (counts.size() != chart.size())
    throw Error(ErrorKind::Configuration, "grid needs one node count per chart parameter");
  if (window && (window->lo.size() != chart.size() || window->hi.size() != chart.size()))
    throw Error(ErrorKind::Configuration, "window needs one interval per chart parameter");
  ChartGrid g;
  g.counts = counts;
  g.compact = true;
  g.windowed = window.has_value();
  for (std::size_t a = 0; a < chart.size(); ++a) {
    const auto& p = chart[a];
    const int n = counts[a];
    if (n < 1) throw Error(ErrorKind::Configuration, "grid node counts must be positive");
    std::vector<double> x, w;
    if (p.periodic) {
      const double L = p.max - p.min;
      for (int k = 0; k < n; ++k) {
        x.push_back(p.min + L * k / n);
        w.push_back(L / n);
      }
    } else if (p.pole) {
      gauss_legendre(n, p.min, p.max, x, w);
    } else {
      g.compact = false;
      const double lo = window ? window->lo[a] : p.min;
      const double hi = window ? window->hi[a] : p.max;
      if (!(hi > lo)) throw Error(ErrorKind::Configuration, "empty window for parameter '" + p.name + "'");
      if (n == 1) {
        x.push_back(0.5 * (lo + hi));
        w.push_back(hi - lo);
      } else {
        const double h = (hi - lo) / (n - 1);
        for (int k = 0; k < n; ++k) {
          x.push_back(lo + h * k);
          w.push_back((k == 0 || k == n - 1) ? 0.5 * h : h);
        }
      }
    }
    g.axes.push_back(std::move(x));
    g.axis_weights.push_back(std::move(w));
    g.axis_periodic.push_back(p.periodic);
  }
  std::size_t total = 1;
  for (int c : counts) total *= c;
  g.nodes.reserve(total);
  g.weights.reserve(total);
  for (std::size_t f = 0; f < total; ++f) {
    const auto idx = g.multi_index(f);
    std::vector<double> u(chart.size());
    double w = 1.0;
    for (std::size_t a = 0; a < chart.size(); ++a) {
      u[a] = g.axes[a][idx[a]];
      w *= g.axis_weights[a][idx[a]];
    }
    g.nodes.push_back(std::move(u));
    g.weights.push_back(w);
  }
  return g;
}

std::vector<double> fd_weights(double x0, const std::vector<double>& x, int order) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][order];
  return w;
}

namespace {

// Start of a window of `width` consecutive nodes around interval/node k.
std::size_t stencil_start(std::size_t k, std::size_t width, std::size_t n, std::size_t left) {
  if (n <= width) return 0;
  std::size_t s = k >= left ? k - left : 0;
  if (s + width > n) s = n - width;
  return s;
}

double lagrange_eval(const double* t, const double* f, int m, double x) {
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    double l = 1.0;
    for (int j = 0; j < m; ++j)
      if (j != i) l *= (x - t[j]) / (t[i] - t[j]);
    s += l * f[i];
  }
  return s;
}

}  // namespace

std::vector<double> cumulative_integral(const std::vector<double>& t, const std::vector<double>& f,
                                        std::size_t ref) {
  const std::size_t n = t.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  // Integral over each interval [t_k, t_{k+1}] of the cubic through four
  // surrounding nodes, by two-point Gauss (exact for cubics).
  std::vector<double> piece(n - 1);
  const double g = 0.5 / std::sqrt(3.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const int m = static_cast<int>(std::min<std::size_t>(4, n));
    const std::size_t s = stencil_start(k, m, n, 1);
    const double h = t[k + 1] - t[k], mid = 0.5 * (t[k] + t[k + 1]);
    piece[k] = 0.5 * h *
               (lagrange_eval(&t[s], &f[s], m, mid - g * h) + lagrange_eval(&t[s], &f[s], m, mid + g * h));
  }
  for (std::size_t k = ref + 1; k < n; ++k) out[k] = out[k - 1] + piece[k - 1];
  for (std::size_t k = ref; k-- > 0;) out[k] = out[k + 1] - piece[k];
  return out;
}

std::vector<double> cumulative_integral(const std::vector<double>& t, const std::vector<double>& f,
                                        const std::vector<double>& df, std::size_t ref) {
  const std::size_t n = t.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = ref + 1; k < n; ++k) {
    const double h = t[k] - t[k - 1];
    out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]) + h * h / 12.0 * (df[k - 1] - df[k]);
  }
  for (std::size_t k = ref; k-- > 0;) {
    const double h = t[k + 1] - t[k];
    out[k] = out[k + 1] - (0.5 * h * (f[k] + f[k + 1]) + h * h / 12.0 * (df[k] - df[k + 1]));
  }
  return out;
}

std::vector<double> sampled_derivative(const std::vector<double>& t, const std::vector<double>& f) {
  const std::size_t n = t.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const std::size_t m = std::min<std::size_t>(5, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t s = stencil_start(k, m, n, 2);
    std::vector<double> x(t.begin() + s, t.begin() + s + m);
    const auto w = fd_weights(t[k], x, 1);
    double d = 0.0;
    for (std::size_t i = 0; i < m; ++i) d += w[i] * f[s + i];
    out[k] = d;
  }
  return out;
}

}  // namespace nullfold
