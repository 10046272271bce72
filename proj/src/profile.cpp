#include "defectlab/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "defectlab/banded.hpp"
#include "defectlab/error.hpp"

namespace defectlab {

namespace {

struct Rhs {
  double f;  // u-equation right-hand side
  double g;  // v-equation right-hand side
};

Rhs rhs(double u, double v, double t) {
  return {u * (-t + 2.0 * v + 6.0 * v * v + 2.0 * u * u),
          v * (-t - v + 6.0 * v * v + 2.0 * u * u) + u * u / 3.0};
}

// Free unknowns: v_0, then (u_i, v_i) for 1 <= i <= N-1.
int iu(int i) { return 2 * i - 1; }
int iv(int i) { return 2 * i; }

void clamp_boundary(Profile& p) {
  const int n = p.nodes() - 1;
  p.u[0] = 0.0;
  p.u[n] = 0.5 * p.s_plus;
  p.v[n] = -p.s_plus / 6.0;
}

void check_finite(const Profile& p) {
  for (int i = 0; i < p.nodes(); ++i)
    if (!std::isfinite(p.u[i]) || !std::isfinite(p.v[i]))
      throw NumericError("profile state is not finite at node " + std::to_string(i));
}

// Energy gradient (free unknowns) and, optionally, its Hessian.
void assemble(const Profile& p, std::vector<double>& grad, BandedSym* hess) {
  const RadialGrid& g = p.grid;
  const int n = g.nodes() - 1;
  const double t = p.params.t;
  const double k2 = double(p.params.k) * p.params.k;
  const auto res = ode_residual(p);
  grad.assign(2 * n - 1, 0.0);
  grad[iv(0)] = -6.0 * g.w[0] * res[0][1];
  for (int i = 1; i < n; ++i) {
    grad[iu(i)] = -2.0 * g.w[i] * res[i][0];
    grad[iv(i)] = -6.0 * g.w[i] * res[i][1];
  }
  if (!hess) return;
  *hess = BandedSym(2 * n - 1, 3);
  BandedSym& h = *hess;
  for (int i = 0; i < n; ++i) {
    const double u = p.u[i];
    const double v = p.v[i];
    const double cl = i > 0 ? g.rmid[i - 1] / g.h[i - 1] : 0.0;
    const double cr = g.rmid[i] / g.h[i];
    const double fvv = 6.0 * (-t - 2.0 * v + 2.0 * u * u + 18.0 * v * v);
    h.add(iv(i), iv(i), 6.0 * (cl + cr) + g.w[i] * fvv);
    if (i + 1 < n) h.add(iv(i), iv(i + 1), -6.0 * cr);
    if (i == 0) continue;
    const double fuu = 2.0 * (-t + 2.0 * v + 6.0 * u * u + 6.0 * v * v);
    const double fuv = 4.0 * u * (1.0 + 6.0 * v);
    const double ri = g.r[i];
    h.add(iu(i), iu(i), 2.0 * (cl + cr) + g.w[i] * (2.0 * k2 / (ri * ri) + fuu));
    h.add(iu(i), iv(i), g.w[i] * fuv);
    if (i + 1 < n) h.add(iu(i), iu(i + 1), -2.0 * cr);
  }
}

bool newton_solve(Profile& p, const SolverOptions& opts) {
  const double target = opts.tol_rel * p.s_plus;
  p.residual_norm = residual_max_norm(p);
  for (int it = 0; it < opts.max_iterations; ++it) {
    if (p.residual_norm <= target) return true;
    const NewtonStep step = newton_step(p, opts.max_halvings);
    ++p.iterations;
    if (!step.accepted) return false;
  }
  return p.residual_norm <= target;
}

bool satisfies_h1(const Profile& p) {
  const double s2 = p.s_plus * p.s_plus;
  for (int i = 1; i + 1 < p.nodes(); ++i) {
    const double u = p.u[i];
    const double v = p.v[i];
    if (!(u > 0.0 && v < 0.0 && u + 3.0 * v < 0.0 && u * u + 3.0 * v * v < s2 / 3.0)) return false;
  }
  return true;
}

}  // namespace

double bulk_potential(double u, double v, double t) {
  const double q = u * u + 3.0 * v * v;
  return -t * q - 2.0 * v * v * v + 2.0 * v * u * u + q * q;
}

double interpolate(const std::vector<double>& r, const std::vector<double>& f, double x) {
  if (x <= r.front()) return f.front();
  if (x >= r.back()) return f.back();
  const auto it = std::upper_bound(r.begin(), r.end(), x);
  const size_t j = static_cast<size_t>(it - r.begin());
  const double a = (x - r[j - 1]) / (r[j] - r[j - 1]);
  return (1.0 - a) * f[j - 1] + a * f[j];
}

Profile initial_guess(const BulkParams& params, const MeshSpec& mesh) {
  params.validate();
  Profile p;
  p.params = params;
  p.mesh = mesh;
  p.grid = RadialGrid::build(mesh);
  p.s_plus = s_plus(params.t);
  const int n = p.nodes();
  const int ak = std::abs(params.k);
  p.u.resize(n);
  p.v.resize(n);
  for (int i = 0; i < n; ++i) {
    const double r = p.grid.r[i];
    const double r2 = r * r;
    p.u[i] = 0.5 * p.s_plus * std::pow(r / std::sqrt(r2 + 2.0), ak);
    p.v[i] = -p.s_plus / 6.0 * r2 / (r2 + 2.0);
  }
  clamp_boundary(p);
  p.residual_norm = residual_max_norm(p);
  return p;
}

std::vector<std::array<double, 2>> ode_residual(const Profile& p) {
  check_finite(p);
  const RadialGrid& g = p.grid;
  const int n = g.nodes() - 1;
  const double t = p.params.t;
  const double k2 = double(p.params.k) * p.params.k;
  std::vector<std::array<double, 2>> res(n + 1);
  {
    const Rhs f = rhs(p.u[0], p.v[0], t);
    const double cr = g.rmid[0] / g.h[0];
    res[0] = {p.u[0], cr * (p.v[1] - p.v[0]) / g.w[0] - f.g};
  }
  for (int i = 1; i < n; ++i) {
    const double cl = g.rmid[i - 1] / g.h[i - 1];
    const double cr = g.rmid[i] / g.h[i];
    const double lap_u = (cr * (p.u[i + 1] - p.u[i]) - cl * (p.u[i] - p.u[i - 1])) / g.w[i];
    const double lap_v = (cr * (p.v[i + 1] - p.v[i]) - cl * (p.v[i] - p.v[i - 1])) / g.w[i];
    const double ri = g.r[i];
    const Rhs f = rhs(p.u[i], p.v[i], t);
    res[i] = {lap_u - k2 * p.u[i] / (ri * ri) - f.f, lap_v - f.g};
  }
  res[n] = {p.u[n] - 0.5 * p.s_plus, p.v[n] + p.s_plus / 6.0};
  return res;
}

double residual_max_norm(const Profile& p) {
  double m = 0.0;
  for (const auto& r : ode_residual(p)) m = std::max({m, std::abs(r[0]), std::abs(r[1])});
  return m;
}

NewtonStep newton_step(Profile& p, int max_halvings) {
  NewtonStep out;
  out.residual_before = residual_max_norm(p);
  std::vector<double> grad;
  BandedSym hess;
  assemble(p, grad, &hess);
  BandedLDLT ldlt;
  ldlt.factor(hess, 1e-15);
  std::vector<double> delta(grad.size());
  for (size_t j = 0; j < grad.size(); ++j) delta[j] = -grad[j];
  ldlt.solve_in_place(delta);

  const int n = p.nodes() - 1;
  const std::vector<double> u0 = p.u;
  const std::vector<double> v0 = p.v;
  double alpha = 1.0;
  for (int h = 0; h <= max_halvings; ++h, alpha *= 0.5) {
    p.v[0] = v0[0] + alpha * delta[iv(0)];
    for (int i = 1; i < n; ++i) {
      p.u[i] = u0[i] + alpha * delta[iu(i)];
      p.v[i] = v0[i] + alpha * delta[iv(i)];
    }
    bool finite = true;
    for (int i = 0; i <= n && finite; ++i) finite = std::isfinite(p.u[i]) && std::isfinite(p.v[i]);
    if (!finite) continue;
    const double r = residual_max_norm(p);
    if (r < out.residual_before) {
      out.residual_after = r;
      out.step_length = alpha;
      out.accepted = true;
      p.residual_norm = r;
      return out;
    }
  }
  p.u = u0;
  p.v = v0;
  out.residual_after = out.residual_before;
  return out;
}

Profile solve_profile(const BulkParams& params, const MeshSpec& mesh, const SolverOptions& opts) {
  Profile p = initial_guess(params, mesh);
  bool ok = false;
  try {
    ok = newton_solve(p, opts);
  } catch (const NumericError&) {
    ok = false;
  }
  if (!ok && opts.allow_continuation) {
    const double t0 = 1.0 / 3.0;
    const int steps = std::max(1, opts.continuation_steps);
    Profile c = initial_guess(BulkParams{t0, params.k}, mesh);
    ok = newton_solve(c, opts);
    int taken = 0;
    for (int j = 1; j <= steps && ok; ++j) {
      const double tj = t0 + (params.t - t0) * double(j) / steps;
      const double sj = s_plus(tj);
      const double scale = sj / c.s_plus;
      for (double& x : c.u) x *= scale;
      for (double& x : c.v) x *= scale;
      c.params.t = tj;
      c.s_plus = sj;
      clamp_boundary(c);
      ok = newton_solve(c, opts);
      ++taken;
    }
    c.params = params;
    c.s_plus = s_plus(params.t);
    c.continuation_steps = taken;
    p = std::move(c);
  }
  p.residual_norm = residual_max_norm(p);
  if (!ok && opts.throw_on_failure)
    throw SolverError("profile solve did not converge", p.residual_norm);
  p.converged = ok;
  p.h1_warning = !satisfies_h1(p);
  differentiate(p);
  return p;
}

void differentiate(Profile& p) {
  const int ak = std::abs(p.params.k);
  const Parity up = ak % 2 == 1 ? Parity::odd : Parity::even;
  p.du = nodal_derivative(p.grid.r, p.u, up, 1);
  p.dv = nodal_derivative(p.grid.r, p.v, Parity::even, 1);
  p.dv[0] = 0.0;
  if (ak >= 2) p.du[0] = 0.0;
}

double discrete_energy(const Profile& p) {
  const RadialGrid& g = p.grid;
  const int n = g.nodes() - 1;
  const double k2 = double(p.params.k) * p.params.k;
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double du = p.u[i + 1] - p.u[i];
    const double dv = p.v[i + 1] - p.v[i];
    e += g.rmid[i] / g.h[i] * (du * du + 3.0 * dv * dv);
  }
  for (int i = 0; i <= n; ++i) {
    double dens = bulk_potential(p.u[i], p.v[i], p.params.t);
    if (g.r[i] > 0.0) dens += k2 * p.u[i] * p.u[i] / (g.r[i] * g.r[i]);
    e += g.w[i] * dens;
  }
  return e;
}

EnergyReport reduced_energy(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("reduced_energy needs derivatives");
  const RadialGrid& g = p.grid;
  const double t = p.params.t;
  const double k2 = double(p.params.k) * p.params.k;
  const double s = p.s_plus;
  EnergyReport rep;
  rep.far_field_density = bulk_potential(0.5 * s, -s / 6.0, t);
  rep.min_shifted_density = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.nodes(); ++i) {
    const double w = g.w[i];
    rep.gradient += w * (p.du[i] * p.du[i] + 3.0 * p.dv[i] * p.dv[i]);
    double cent = 0.0;
    if (g.r[i] > 0.0) {
      cent = k2 * p.u[i] * p.u[i] / (g.r[i] * g.r[i]);
    } else if (std::abs(p.params.k) == 1) {
      cent = p.du[0] * p.du[0];
    }
    rep.centrifugal += w * cent;
    const double f = bulk_potential(p.u[i], p.v[i], t);
    rep.potential += w * f;
    rep.shifted_potential += w * (f - rep.far_field_density);
    rep.min_shifted_density = std::min(rep.min_shifted_density, f - rep.far_field_density);
  }
  rep.truncated_energy = rep.gradient + rep.centrifugal + rep.potential;
  rep.shifted_energy = rep.gradient + rep.centrifugal + rep.shifted_potential;
  rep.core_energy = rep.shifted_energy - k2 * 0.25 * s * s * std::log(p.mesh.r_max);
  return rep;
}

AsymptoticFit asymptotic_fit(const Profile& p) {
  const auto& r = p.grid.r;
  const double r1 = r[1];
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (int i = 1; i < p.nodes() && r[i] <= 10.0 * r1 * (1.0 + 1e-12); ++i) {
    if (!(p.u[i] > 0.0)) continue;
    const double x = std::log(r[i]);
    const double y = std::log(p.u[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 5) throw PreconditionError("asymptotic_fit: origin window has fewer than five nodes");
  AsymptoticFit fit;
  const double det = m * sxx - sx * sx;
  fit.origin_exponent = (m * sxy - sx * sy) / det;
  fit.origin_coeff = std::exp((sy - fit.origin_exponent * sx) / m);
  fit.window_nodes = m;
  const double x = 0.9 * p.mesh.r_max;
  fit.tail_defects = {0.5 * p.s_plus - interpolate(r, p.u, x),
                      -p.s_plus / 6.0 - interpolate(r, p.v, x)};
  return fit;
}

}  // namespace defectlab
