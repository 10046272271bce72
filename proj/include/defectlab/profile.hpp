#pragma once

// Radial defect profile (u, v) on a truncated domain: the two-point boundary
// value problem
//
//   u'' + u'/r - k^2 u / r^2 = u (-t + 2v + 6v^2 + 2u^2)
//   v'' + v'/r               = v (-t - v + 6v^2 + 2u^2) + u^2 / 3
//
// with u(0) = 0, v'(0) = 0, u(r_max) = s+/2, v(r_max) = -s+/6.
//
// The discretization is the finite-volume form of the reduced energy
// E_h = sum_edges rmid/h [(du)^2 + 3 (dv)^2] + sum_nodes w_i [k^2 u^2/r^2 + F(u, v)],
// so interior rows are the usual second-order central differences and the
// origin row of the v-equation reduces to 4 (v_1 - v_0) / h^2 = RHS(v_0, 0).

#include <array>
#include <string>
#include <vector>

#include "defectlab/mesh.hpp"
#include "defectlab/qtensor.hpp"

namespace defectlab {

struct SolverOptions {
  double tol_rel = 1e-10;  // residual max-norm target, relative to s+
  int max_iterations = 60;
  int max_halvings = 30;
  int continuation_steps = 8;
  bool allow_continuation = true;
  bool throw_on_failure = true;  // otherwise return the last iterate with converged = false
};

struct Profile {
  BulkParams params;
  MeshSpec mesh;
  RadialGrid grid;
  double s_plus = 0.0;

  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> du;
  std::vector<double> dv;

  double residual_norm = 0.0;
  int iterations = 0;
  int continuation_steps = 0;
  bool converged = false;
  bool h1_warning = false;

  const std::vector<double>& r() const { return grid.r; }
  int nodes() const { return grid.nodes(); }
  bool has_derivatives() const { return du.size() == u.size() && dv.size() == v.size(); }
};

// Bulk potential of the reduced energy and its far-field value.
double bulk_potential(double u, double v, double t);

Profile initial_guess(const BulkParams& params, const MeshSpec& mesh);

// Per-node residuals {u-row, v-row}. Dirichlet rows hold u_0, u_N - s+/2 and
// v_N + s+/6; the origin v-row is the regularized equation.
std::vector<std::array<double, 2>> ode_residual(const Profile& p);
double residual_max_norm(const Profile& p);

struct NewtonStep {
  double residual_before = 0.0;
  double residual_after = 0.0;
  double step_length = 0.0;
  bool accepted = false;
};

// One damped Newton step in place (step halving on residual increase).
NewtonStep newton_step(Profile& p, int max_halvings = 30);

// Damped Newton from the initial guess, falling back to continuation in t
// from t = 1/3. Throws SolverError on failure unless opts.throw_on_failure
// is false.
Profile solve_profile(const BulkParams& params, const MeshSpec& mesh,
                      const SolverOptions& opts = {});

// Fourth-order nodal derivatives; u is odd about r = 0 for odd k and even
// for even k, v is even.
void differentiate(Profile& p);

// Discrete reduced energy E_h, the functional whose gradient is the
// discrete ODE system.
double discrete_energy(const Profile& p);

struct EnergyReport {
  double truncated_energy = 0.0;
  double shifted_energy = 0.0;
  double core_energy = 0.0;
  double gradient = 0.0;
  double centrifugal = 0.0;
  double potential = 0.0;
  double shifted_potential = 0.0;
  double far_field_density = 0.0;
  double min_shifted_density = 0.0;
};

EnergyReport reduced_energy(const Profile& p);

struct AsymptoticFit {
  double origin_exponent = 0.0;
  double origin_coeff = 0.0;
  std::array<double, 2> tail_defects{};  // (s+/2 - u, -s+/6 - v) at 0.9 r_max
  int window_nodes = 0;
};

AsymptoticFit asymptotic_fit(const Profile& p);

// Linear interpolation of nodal samples.
double interpolate(const std::vector<double>& r, const std::vector<double>& f, double x);

}  // namespace defectlab
