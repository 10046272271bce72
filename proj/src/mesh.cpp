#include "defectlab/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "defectlab/error.hpp"

namespace defectlab {

const char* to_string(Grading g) {
  return g == Grading::uniform ? "uniform" : "geometric";
}

Grading grading_from_string(const std::string& s) {
  if (s == "uniform") return Grading::uniform;
  if (s == "geometric") return Grading::geometric;
  throw DomainError("unknown grading '" + s + "'");
}

void MeshSpec::validate() const {
  if (!std::isfinite(r_max) || r_max <= 0.0) throw DomainError("r_max must be > 0");
  if (intervals < 64) throw DomainError("mesh needs at least 64 intervals");
  if (grading == Grading::geometric) {
    if (!(ratio > 1.0 && ratio <= 1.1)) throw DomainError("geometric ratio must lie in (1, 1.1]");
    const double h0 = r_max * (ratio - 1.0) / (std::pow(ratio, intervals) - 1.0);
    if (!(h0 > 1e-10)) throw DomainError("geometric grading collapses the first cell");
  }
}

RadialGrid RadialGrid::build(const MeshSpec& spec) {
  spec.validate();
  const int n = spec.intervals;
  std::vector<double> r(n + 1, 0.0);
  if (spec.grading == Grading::uniform) {
    const double h = spec.r_max / n;
    for (int i = 0; i <= n; ++i) r[i] = i * h;
  } else {
    const double q = spec.ratio;
    const double h0 = spec.r_max * (q - 1.0) / (std::pow(q, n) - 1.0);
    double step = h0;
    for (int i = 1; i <= n; ++i) {
      r[i] = r[i - 1] + step;
      step *= q;
    }
  }
  r[n] = spec.r_max;
  return from_nodes(std::move(r));
}

RadialGrid RadialGrid::from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 3) throw DomainError("grid needs at least three nodes");
  if (nodes.front() != 0.0) throw DomainError("grid must start at r = 0");
  RadialGrid g;
  g.r = std::move(nodes);
  const int n = static_cast<int>(g.r.size()) - 1;
  g.h.resize(n);
  g.rmid.resize(n);
  for (int e = 0; e < n; ++e) {
    g.h[e] = g.r[e + 1] - g.r[e];
    if (!(g.h[e] > 0.0)) throw DomainError("grid nodes must increase strictly");
    g.rmid[e] = 0.5 * (g.r[e] + g.r[e + 1]);
  }
  g.w.assign(n + 1, 0.0);
  g.w[0] = 0.5 * g.rmid[0] * g.rmid[0];
  for (int i = 1; i < n; ++i) g.w[i] = 0.5 * (g.rmid[i] * g.rmid[i] - g.rmid[i - 1] * g.rmid[i - 1]);
  g.w[n] = 0.5 * (g.r[n] * g.r[n] - g.rmid[n - 1] * g.rmid[n - 1]);
  return g;
}

int RadialGrid::index_at_or_above(double radius) const {
  auto it = std::lower_bound(r.begin(), r.end(), radius);
  if (it == r.end()) return nodes() - 1;
  return static_cast<int>(it - r.begin());
}

std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> x,
                                                  int max_order) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

std::vector<double> nodal_derivative(std::span<const double> r, std::span<const double> f,
                                     Parity parity, int order) {
  if (r.size() != f.size()) throw PreconditionError("nodal_derivative: size mismatch");
  if (r.size() < 5) throw PreconditionError("nodal_derivative: need at least five nodes");
  if (order < 1 || order > 2) throw PreconditionError("nodal_derivative: order must be 1 or 2");
  const int n = static_cast<int>(r.size());
  const double sign = parity == Parity::odd ? -1.0 : 1.0;
  std::vector<double> out(n, 0.0);
  std::array<double, 5> xs{};
  std::array<double, 5> fs{};
  for (int i = 0; i < n; ++i) {
    int lo = i - 2;
    if (lo + 4 > n - 1) lo = n - 5;
    if (lo < 0 && parity == Parity::none) lo = 0;
    for (int s = 0; s < 5; ++s) {
      const int j = lo + s;
      if (j >= 0) {
        xs[s] = r[j];
        fs[s] = f[j];
      } else {
        xs[s] = -r[-j];
        fs[s] = sign * f[-j];
      }
    }
    const auto wts = fornberg_weights(r[i], xs, order);
    double d = 0.0;
    for (int s = 0; s < 5; ++s) d += wts[order][s] * fs[s];
    out[i] = d;
  }
  return out;
}

}  // namespace defectlab
