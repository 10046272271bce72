#include "defectlab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "defectlab/error.hpp"

namespace defectlab {

namespace {

const double kSqrt3 = std::sqrt(3.0);
constexpr double kPi = std::numbers::pi;

void require_size(const Profile& p, std::span<const double> f, const char* what) {
  if (static_cast<int>(f.size()) != p.nodes())
    throw PreconditionError(std::string(what) + ": field length does not match the profile grid");
}

void require_derivatives(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("profile has no derivatives; call differentiate()");
}

double max_edge(const RadialGrid& g) { return *std::max_element(g.h.begin(), g.h.end()); }

FormValue make_value(const Profile& p, double value) {
  FormValue f;
  f.value = value;
  f.grid_spacing = max_edge(p.grid);
  return f;
}

// sum_e rmid_e / h_e * g(e), g(e) built from the edge [e, e+1]
template <class G>
double edge_sum(const RadialGrid& g, G&& term) {
  double s = 0.0;
  for (int e = 0; e < g.intervals(); ++e) s += g.rmid[e] / g.h[e] * term(e);
  return s;
}

template <class G>
double node_sum(const RadialGrid& g, G&& term) {
  double s = 0.0;
  for (int i = 0; i < g.nodes(); ++i) s += g.w[i] * term(i);
  return s;
}

double sq(double x) { return x * x; }

double diff(std::span<const double> f, int e) { return f[e + 1] - f[e]; }

double mid(std::span<const double> f, int e) { return 0.5 * (f[e] + f[e + 1]); }

// u/r with the regular value u'(0) at the origin.
std::vector<double> u_over_r(const Profile& p) {
  std::vector<double> q(p.nodes());
  for (int i = 0; i < p.nodes(); ++i) q[i] = i == 0 ? p.du[0] : p.u[i] / p.r()[i];
  return q;
}

}  // namespace

LocalCoefficients local_coefficients(const Profile& p, int i) {
  LocalCoefficients c;
  const double t = p.params.t;
  c.r = p.r()[i];
  c.inv_r2 = c.r > 0.0 ? 1.0 / (c.r * c.r) : 0.0;
  c.u = p.u[i];
  c.v = p.v[i];
  if (p.has_derivatives()) {
    c.du = p.du[i];
    c.dv = p.dv[i];
  }
  const double u2 = c.u * c.u;
  const double v2 = c.v * c.v;
  c.p0 = 18.0 * v2 + 2.0 * u2 - t - 2.0 * c.v;
  c.p1 = 6.0 * v2 + 6.0 * u2 - t + 2.0 * c.v;
  c.p2 = 6.0 * v2 + 2.0 * u2 - t + 2.0 * c.v;
  c.pb = 6.0 * v2 + 2.0 * u2 - t - c.v;
  c.c01 = 4.0 * c.u / kSqrt3 * (1.0 + 6.0 * c.v);
  return c;
}

double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

// ---------------------------------------------------------------------------

TestFunction TestFunction::from_samples(const RadialGrid& grid, std::vector<double> samples) {
  if (static_cast<int>(samples.size()) != grid.nodes())
    throw PreconditionError("test function length does not match the grid");
  for (double x : samples)
    if (!std::isfinite(x)) throw DomainError("test function has non-finite samples");
  if (samples.front() != 0.0 || samples.back() != 0.0)
    throw PreconditionError("test function must vanish at r = 0 and r = r_max");
  TestFunction f;
  f.f_ = std::move(samples);
  const int n = grid.nodes();
  int lo = n, hi = -1;
  for (int i = 0; i < n; ++i)
    if (f.f_[i] != 0.0) {
      lo = std::min(lo, i);
      hi = i;
    }
  f.lo_ = hi < 0 ? 0 : lo;
  f.hi_ = hi < 0 ? 0 : hi;
  return f;
}

TestFunction TestFunction::gaussian_bump(const RadialGrid& grid, double center, double width,
                                         double lo, double hi) {
  const double r_max = grid.r.back();
  if (!(lo > 0.0 && hi < r_max && lo < center && center < hi && width > 0.0))
    throw ConstraintError("bump needs 0 < lo < center < hi < r_max and width > 0");
  const double ramp = 0.25 * (hi - lo);
  std::vector<double> f(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) {
    const double r = grid.r[i];
    const double cut = smooth_step((r - lo) / ramp) * smooth_step((hi - r) / ramp);
    f[i] = cut == 0.0 ? 0.0 : cut * std::exp(-sq((r - center) / width));
  }
  return from_samples(grid, std::move(f));
}

TestFunction TestFunction::plateau(const RadialGrid& grid, double a, double b, double ramp) {
  const double r_max = grid.r.back();
  if (!(a > 0.0 && b < r_max && ramp > 0.0 && a + 2.0 * ramp <= b))
    throw ConstraintError("plateau needs 0 < a, b < r_max and a + 2 ramp <= b");
  std::vector<double> f(grid.nodes());
  for (int i = 0; i < grid.nodes(); ++i) {
    const double r = grid.r[i];
    f[i] = smooth_step((r - a) / ramp) * smooth_step((b - r) / ramp);
  }
  return from_samples(grid, std::move(f));
}

// ---------------------------------------------------------------------------

const char* to_string(Identity id) {
  switch (id) {
    case Identity::A: return "A";
    case Identity::B: return "B";
    case Identity::C: return "C";
    case Identity::D: return "D";
    case Identity::E: return "E";
  }
  return "?";
}

IdentityPair identity_pair(const Profile& p, Identity which, const TestFunction& eta) {
  require_derivatives(p);
  const std::span<const double> h = eta.span();
  require_size(p, h, "identity_pair");
  const RadialGrid& g = p.grid;
  const int n = p.nodes();
  const int k2 = p.params.k * p.params.k;

  // Multiplier f of eta in the defining integral.
  std::vector<double> f;
  switch (which) {
    case Identity::A: f = p.v; break;
    case Identity::B: f = p.u; break;
    case Identity::C: f = p.dv; break;
    case Identity::D: f = p.du; break;
    case Identity::E: f = u_over_r(p); break;
  }
  std::vector<double> fh(n);
  for (int i = 0; i < n; ++i) fh[i] = f[i] * h[i];

  // Potential multiplying (f eta)^2 in the defining integral.
  auto potential = [&](int i) {
    const LocalCoefficients c = local_coefficients(p, i);
    switch (which) {
      case Identity::A: return c.pb;
      case Identity::B: return c.p2 + k2 * c.inv_r2;
      case Identity::C: return c.p0;
      case Identity::D: return c.p1 + k2 * c.inv_r2;
      case Identity::E: return c.p2 + k2 * c.inv_r2;
    }
    return 0.0;
  };

  const double lhs = edge_sum(g, [&](int e) { return sq(diff(fh, e)); }) +
                     node_sum(g, [&](int i) { return potential(i) * sq(fh[i]); });

  // Reduced integrand: (f_mid * d eta)^2 plus a nodal term in eta^2.
  auto reduced = [&](int i) {
    const LocalCoefficients c = local_coefficients(p, i);
    const double e2 = sq(h[i]);
    const double r = c.r;
    switch (which) {
      case Identity::A: return -c.v * c.u * c.u * e2 / 3.0;
      case Identity::B: return 0.0;
      case Identity::C:
        return -sq(c.dv * h[i]) * c.inv_r2 -
               2.0 * c.u * c.du * c.dv * (1.0 + 6.0 * c.v) / 3.0 * e2;
      case Identity::D: {
        const double cubic = r > 0.0 ? 2.0 * k2 * c.u * c.du / (r * r * r) : 0.0;
        return -sq(c.du * h[i]) * c.inv_r2 + cubic * e2 -
               2.0 * c.u * c.du * c.dv * (1.0 + 6.0 * c.v) * e2;
      }
      case Identity::E:
        return r > 0.0 ? e2 * (2.0 * r * c.u * c.du - c.u * c.u) / (r * r * r * r) : 0.0;
    }
    return 0.0;
  };
  const double rhs = edge_sum(g, [&](int e) { return sq(mid(f, e) * diff(h, e)); }) +
                     node_sum(g, reduced);

  IdentityPair out;
  out.lhs = make_value(p, lhs);
  out.rhs = make_value(p, rhs);
  out.precision_warning =
      (which == Identity::D || which == Identity::E) && eta.hi() > 0 && eta.lo() <= 2;
  return out;
}

FormValue reduced_second_variation_J(const Profile& p, std::span<const double> eta,
                                     std::span<const double> xi) {
  require_size(p, eta, "J");
  require_size(p, xi, "J");
  const int k2 = p.params.k * p.params.k;
  const double grad = edge_sum(p.grid, [&](int e) { return sq(diff(eta, e)) + sq(diff(xi, e)); });
  const double pot = node_sum(p.grid, [&](int i) {
    const LocalCoefficients c = local_coefficients(p, i);
    return c.p0 * sq(eta[i]) + (c.p1 + k2 * c.inv_r2) * sq(xi[i]) + c.c01 * eta[i] * xi[i];
  });
  return make_value(p, grad + pot);
}

// ---------------------------------------------------------------------------

const char* to_string(Sector s) {
  switch (s) {
    case Sector::A0_01: return "A0_01";
    case Sector::A0_2: return "A0_2";
    case Sector::A_n: return "A_n";
    case Sector::B_pair: return "B_pair";
  }
  return "?";
}

BlockSpec BlockSpec::a0_01(int k) {
  BlockSpec b;
  b.sector = Sector::A0_01;
  b.k = k;
  b.validate();
  return b;
}

BlockSpec BlockSpec::a0_2(int k) {
  BlockSpec b;
  b.sector = Sector::A0_2;
  b.k = k;
  b.validate();
  return b;
}

BlockSpec BlockSpec::a_n(int k, int n) {
  BlockSpec b;
  b.sector = Sector::A_n;
  b.k = k;
  b.n = n;
  b.validate();
  return b;
}

namespace {
int ceil_half(int k) { return k >= 0 ? (k + 1) / 2 : -((-k) / 2); }
}  // namespace

BlockSpec BlockSpec::b_pair(int k, int j) {
  if (j < 1) throw DomainError("pair index must be >= 1");
  BlockSpec b;
  b.sector = Sector::B_pair;
  b.k = k;
  b.m = ceil_half(k) + j - 1;
  b.l = k - b.m;
  b.validate();
  return b;
}

int BlockSpec::pair_index() const { return m - ceil_half(k) + 1; }

int BlockSpec::field_count() const {
  switch (sector) {
    case Sector::A0_01: return 2;
    case Sector::A0_2: return 1;
    case Sector::A_n: return 6;
    case Sector::B_pair: return self_pair() ? 2 : 4;
  }
  return 0;
}

std::string BlockSpec::name() const {
  switch (sector) {
    case Sector::A0_01: return "A0_01";
    case Sector::A0_2: return "A0_2";
    case Sector::A_n: return "A_" + std::to_string(n);
    case Sector::B_pair: return "B(" + std::to_string(m) + "," + std::to_string(l) + ")";
  }
  return "?";
}

void BlockSpec::validate() const {
  if (k == 0) throw DomainError("block requires k != 0");
  if (sector == Sector::A_n && n < 1) throw DomainError("A_n block requires n >= 1");
  if (sector == Sector::B_pair && (m + l != k || m < l))
    throw DomainError("B pair requires m + l = k and m >= l");
}

std::vector<std::vector<double>> BlockSpec::origin_modes() const {
  std::vector<std::vector<double>> modes;
  switch (sector) {
    case Sector::A0_01: modes.push_back({1.0, 0.0}); break;
    case Sector::A0_2: break;
    case Sector::A_n:
      if (n == std::abs(k)) {
        // (w1, w2) at n = |k| can form a constant tensor: nu2 = -sgn(k) mu1,
        // mu2 = sgn(k) nu1.
        const double sg = k > 0 ? 1.0 : -1.0;
        const double a = 1.0 / std::sqrt(2.0);
        modes.push_back({0, 0, a, 0, 0, -sg * a});
        modes.push_back({0, 0, 0, a, sg * a, 0});
      }
      break;
    case Sector::B_pair:
      if (self_pair()) {
        if (m == 0) {
          modes.push_back({1.0, 0.0});
          modes.push_back({0.0, 1.0});
        }
      } else if (m == 0) {
        modes.push_back({1, 0, 0, 0});
        modes.push_back({0, 0, 1, 0});
      } else if (l == 0) {
        modes.push_back({0, 1, 0, 0});
        modes.push_back({0, 0, 0, 1});
      }
      break;
  }
  return modes;
}

namespace {

void check_origin(const BlockSpec& spec, std::span<const RadialField> fields) {
  const int nf = spec.field_count();
  std::vector<double> x(nf);
  double scale = 0.0;
  for (int f = 0; f < nf; ++f) {
    x[f] = fields[f][0];
    for (double y : fields[f]) scale = std::max(scale, std::abs(y));
  }
  for (const auto& mode : spec.origin_modes()) {
    double dot = 0.0;
    for (int f = 0; f < nf; ++f) dot += mode[f] * x[f];
    for (int f = 0; f < nf; ++f) x[f] -= dot * mode[f];
  }
  for (double y : x)
    if (std::abs(y) > 1e-12 * std::max(scale, 1e-300))
      throw PreconditionError("block " + spec.name() +
                              ": field value at r = 0 is not regular for this block");
}

}  // namespace

FormValue block_form(const Profile& p, const BlockSpec& spec, std::span<const RadialField> fields) {
  spec.validate();
  if (spec.k != p.params.k) throw PreconditionError("block winding differs from the profile's");
  const int nf = spec.field_count();
  if (static_cast<int>(fields.size()) != nf)
    throw PreconditionError("block " + spec.name() + " expects " + std::to_string(nf) + " fields");
  for (const auto& f : fields) require_size(p, f, "block_form");
  check_origin(spec, fields);

  const RadialGrid& g = p.grid;
  const double grad = edge_sum(g, [&](int e) {
    double s = 0.0;
    for (const auto& f : fields) s += sq(diff(f, e));
    return s;
  });

  const int k = spec.k;
  const double k2 = static_cast<double>(k) * k;
  double pot = 0.0;
  switch (spec.sector) {
    case Sector::A0_01: {
      const auto& a = fields[0];
      const auto& b = fields[1];
      pot = node_sum(g, [&](int i) {
        const LocalCoefficients c = local_coefficients(p, i);
        return sq(a[i]) * c.p0 + sq(b[i]) * (c.p1 + k2 * c.inv_r2) + c.c01 * a[i] * b[i];
      });
      break;
    }
    case Sector::A0_2: {
      const auto& a = fields[0];
      pot = node_sum(g, [&](int i) {
        const LocalCoefficients c = local_coefficients(p, i);
        return sq(a[i]) * (c.p2 + k2 * c.inv_r2);
      });
      break;
    }
    case Sector::A_n: {
      const auto& mu0 = fields[0];
      const auto& nu0 = fields[1];
      const auto& mu1 = fields[2];
      const auto& nu1 = fields[3];
      const auto& mu2 = fields[4];
      const auto& nu2 = fields[5];
      const double n = spec.n;
      pot = node_sum(g, [&](int i) {
        const LocalCoefficients c = local_coefficients(p, i);
        double all = 0.0;
        for (const auto& f : fields) all += sq(f[i]);
        return 4.0 * k * n * c.inv_r2 * (mu1[i] * nu2[i] - mu2[i] * nu1[i]) +
               n * n * c.inv_r2 * all + (sq(mu0[i]) + sq(nu0[i])) * c.p0 +
               (sq(mu1[i]) + sq(nu1[i])) * (c.p1 + k2 * c.inv_r2) +
               (sq(mu2[i]) + sq(nu2[i])) * (c.p2 + k2 * c.inv_r2) +
               c.c01 * (mu0[i] * mu1[i] + nu0[i] * nu1[i]);
      });
      break;
    }
    case Sector::B_pair: {
      const double m2 = static_cast<double>(spec.m) * spec.m;
      const double l2 = static_cast<double>(spec.l) * spec.l;
      if (spec.self_pair()) {
        const auto& re = fields[0];
        const auto& im = fields[1];
        pot = node_sum(g, [&](int i) {
          const LocalCoefficients c = local_coefficients(p, i);
          const double mod = sq(re[i]) + sq(im[i]);
          return (m2 * c.inv_r2 + c.pb) * mod - c.u * (sq(re[i]) - sq(im[i]));
        });
      } else {
        const auto& re_m = fields[0];
        const auto& re_l = fields[1];
        const auto& im_m = fields[2];
        const auto& im_l = fields[3];
        pot = node_sum(g, [&](int i) {
          const LocalCoefficients c = local_coefficients(p, i);
          const double zm = sq(re_m[i]) + sq(im_m[i]);
          const double zl = sq(re_l[i]) + sq(im_l[i]);
          return m2 * c.inv_r2 * zm + l2 * c.inv_r2 * zl + c.pb * (zm + zl) -
                 2.0 * c.u * (re_m[i] * re_l[i] - im_m[i] * im_l[i]);
        });
      }
      break;
    }
  }
  return make_value(p, grad + pot);
}

// ---------------------------------------------------------------------------

SosResult sos_forms(const Profile& p, SosVariant variant,
                    std::span<const std::span<const double>> inputs) {
  require_derivatives(p);
  const RadialGrid& g = p.grid;
  const int n = p.nodes();
  SosResult out;

  // Edge term (f_mid * d x)^2 and its minimum density.
  auto weighted_grad = [&](const std::vector<double>& f, std::span<const double> x, double& mn) {
    mn = 0.0;
    double s = 0.0;
    for (int e = 0; e < g.intervals(); ++e) {
      const double d = g.rmid[e] / g.h[e] * sq(mid(f, e) * diff(x, e));
      s += d;
      mn = std::min(mn, d / (g.rmid[e] * g.h[e]));
    }
    return s;
  };
  auto nodal = [&](auto&& density, double& mn) {
    mn = 0.0;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = density(i);
      s += g.w[i] * d;
      mn = std::min(mn, d);
    }
    return s;
  };

  if (variant == SosVariant::B) {
    if (inputs.size() != 2) throw PreconditionError("SOS variant B takes (zeta, eta)");
    const auto zeta = inputs[0];
    const auto eta = inputs[1];
    require_size(p, zeta, "sos_forms");
    require_size(p, eta, "sos_forms");
    // (k, 0) pair of the B sector: z_k carries k^2 / r^2.
    const double k2 = static_cast<double>(p.params.k) * p.params.k;
    std::vector<double> q0(n), q1(n);
    for (int i = 0; i < n; ++i) {
      q0[i] = p.v[i] * zeta[i];
      q1[i] = p.u[i] * eta[i];
    }
    const double direct =
        edge_sum(g, [&](int e) { return sq(diff(q0, e)) + sq(diff(q1, e)); }) +
        node_sum(g, [&](int i) {
          const LocalCoefficients c = local_coefficients(p, i);
          return sq(q1[i]) * k2 * c.inv_r2 + c.pb * (sq(q0[i]) + sq(q1[i])) -
                 2.0 * c.u * q0[i] * q1[i];
        });
    double m0, m1, m2;
    const double s0 = weighted_grad(p.u, eta, m0);
    const double s1 = weighted_grad(p.v, zeta, m1);
    const double s2 = nodal(
        [&](int i) { return -p.v[i] * sq(p.u[i]) * sq(3.0 * eta[i] + zeta[i]) / 3.0; }, m2);
    out.direct = make_value(p, direct);
    out.sos = make_value(p, s0 + s1 + s2);
    out.summands = {s0, s1, s2};
    out.min_densities = {m0, m1, m2};
    return out;
  }

  if (std::abs(p.params.k) != 1) throw PreconditionError("SOS variant A1 requires |k| = 1");
  if (inputs.size() != 3) throw PreconditionError("SOS variant A1 takes (xi, eta, zeta)");
  const auto xi = inputs[0];
  const auto eta = inputs[1];
  const auto zeta = inputs[2];
  require_size(p, xi, "sos_forms");
  require_size(p, eta, "sos_forms");
  require_size(p, zeta, "sos_forms");
  const std::vector<double> uor = u_over_r(p);
  std::vector<double> a0(n), a1(n), a2(n);
  for (int i = 0; i < n; ++i) {
    a0[i] = p.dv[i] * xi[i];
    a1[i] = p.du[i] * eta[i];
    a2[i] = uor[i] * zeta[i];
  }
  const double direct =
      edge_sum(g, [&](int e) { return sq(diff(a0, e)) + sq(diff(a1, e)) + sq(diff(a2, e)); }) +
      node_sum(g, [&](int i) {
        const LocalCoefficients c = local_coefficients(p, i);
        return c.inv_r2 * (sq(a0[i]) + sq(a1[i]) + sq(a2[i])) - 4.0 * c.inv_r2 * a1[i] * a2[i] +
               sq(a0[i]) * c.p0 + sq(a1[i]) * (c.p1 + c.inv_r2) + sq(a2[i]) * (c.p2 + c.inv_r2) +
               c.c01 * a0[i] * a1[i];
      });
  double m0, m1, m2, m3, m4;
  const double s0 = weighted_grad(p.dv, xi, m0);
  const double s1 = weighted_grad(p.du, eta, m1);
  const double s2 = weighted_grad(uor, zeta, m2);
  const double s3 = nodal(
      [&](int i) {
        const double r = p.r()[i];
        return r > 0.0 ? 2.0 * p.u[i] * p.du[i] / (r * r * r) * sq(eta[i] - zeta[i]) : 0.0;
      },
      m3);
  const double s4 = nodal(
      [&](int i) {
        return -2.0 * p.u[i] * p.du[i] * p.dv[i] * (1.0 + 6.0 * p.v[i]) *
               sq(eta[i] - xi[i] / kSqrt3);
      },
      m4);
  out.direct = make_value(p, direct);
  out.sos = make_value(p, s0 + s1 + s2 + s3 + s4);
  out.summands = {s0, s1, s2, s3, s4};
  out.min_densities = {m0, m1, m2, m3, m4};
  return out;
}

// ---------------------------------------------------------------------------

int ModeCoefficients::max_mode() const {
  int mx = 0;
  for (const auto& a : this->a) mx = std::max(mx, a.n);
  for (const auto& b : this->b) mx = std::max({mx, std::abs(b.m), std::abs(b.l)});
  return mx;
}

namespace {

RadialField random_field(const RadialGrid& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double ramp = 0.2 * (hi - lo);
  RadialField f(g.nodes(), 0.0);
  for (int b = 0; b < 2; ++b) {
    const double c = lo + (hi - lo) * (0.15 + 0.7 * unit(rng));
    const double w = 0.5 + 2.5 * unit(rng);
    const double amp = normal(rng);
    for (int i = 0; i < g.nodes(); ++i) f[i] += amp * std::exp(-sq((g.r[i] - c) / w));
  }
  for (int i = 0; i < g.nodes(); ++i)
    f[i] *= smooth_step((g.r[i] - lo) / ramp) * smooth_step((hi - g.r[i]) / ramp);
  return f;
}

}  // namespace

ModeCoefficients random_coefficients(const Profile& p, int n_max, int m_max, std::uint64_t seed,
                                     double r_lo, double r_hi) {
  if (n_max < 0 || m_max < 0) throw DomainError("mode bounds must be >= 0");
  if (!(r_lo > 0.0 && r_lo < r_hi && r_hi < p.r().back()))
    throw ConstraintError("random coefficients need 0 < r_lo < r_hi < r_max");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(0.7);
  ModeCoefficients c;
  c.k = p.params.k;
  for (int n = 0; n <= n_max; ++n) {
    AMode a;
    a.n = n;
    for (int i = 0; i < 3; ++i) {
      if (keep(rng)) a.mu[i] = random_field(p.grid, rng, r_lo, r_hi);
      if (n > 0 && keep(rng)) a.nu[i] = random_field(p.grid, rng, r_lo, r_hi);
    }
    c.a.push_back(std::move(a));
  }
  for (int j = 1; j <= m_max; ++j) {
    const BlockSpec s = BlockSpec::b_pair(c.k, j);
    BPairMode b;
    b.m = s.m;
    b.l = s.l;
    if (keep(rng)) b.re_m = random_field(p.grid, rng, r_lo, r_hi);
    if (keep(rng)) b.im_m = random_field(p.grid, rng, r_lo, r_hi);
    if (!s.self_pair()) {
      if (keep(rng)) b.re_l = random_field(p.grid, rng, r_lo, r_hi);
      if (keep(rng)) b.im_l = random_field(p.grid, rng, r_lo, r_hi);
    }
    c.b.push_back(std::move(b));
  }
  return c;
}

namespace {

RadialField or_zero(const RadialField& f, int n) { return f.empty() ? RadialField(n, 0.0) : f; }

void validate_coefficients(const Profile& p, const ModeCoefficients& c) {
  if (c.k != p.params.k) throw PreconditionError("coefficients were built for another winding");
  const int n = p.nodes();
  auto check = [&](const RadialField& f) {
    if (!f.empty() && static_cast<int>(f.size()) != n)
      throw PreconditionError("mode coefficient length does not match the profile grid");
  };
  std::vector<int> ns;
  for (const auto& a : c.a) {
    if (a.n < 0) throw DomainError("negative Fourier index");
    ns.push_back(a.n);
    for (int i = 0; i < 3; ++i) {
      check(a.mu[i]);
      check(a.nu[i]);
      if (a.n == 0 && !a.nu[i].empty()) throw PreconditionError("nu coefficients at n = 0");
    }
  }
  std::sort(ns.begin(), ns.end());
  if (std::adjacent_find(ns.begin(), ns.end()) != ns.end())
    throw PreconditionError("repeated Fourier index in coefficients");
  std::vector<int> ms;
  for (const auto& b : c.b) {
    if (b.m + b.l != c.k || b.m < b.l) throw PreconditionError("B pair needs m + l = k, m >= l");
    if (b.m == b.l && (!b.re_l.empty() || !b.im_l.empty()))
      throw PreconditionError("self pair carries a single complex field");
    ms.push_back(b.m);
    check(b.re_m);
    check(b.im_m);
    check(b.re_l);
    check(b.im_l);
  }
  std::sort(ms.begin(), ms.end());
  if (std::adjacent_find(ms.begin(), ms.end()) != ms.end())
    throw PreconditionError("repeated B pair in coefficients");
}

}  // namespace

std::vector<RadialField> block_fields(const Profile& p, const ModeCoefficients& c,
                                      const BlockSpec& spec) {
  const int n = p.nodes();
  std::vector<RadialField> f(spec.field_count(), RadialField(n, 0.0));
  switch (spec.sector) {
    case Sector::A0_01:
    case Sector::A0_2:
      for (const auto& a : c.a)
        if (a.n == 0) {
          if (spec.sector == Sector::A0_01) {
            f[0] = or_zero(a.mu[0], n);
            f[1] = or_zero(a.mu[1], n);
          } else {
            f[0] = or_zero(a.mu[2], n);
          }
        }
      break;
    case Sector::A_n:
      for (const auto& a : c.a)
        if (a.n == spec.n)
          for (int i = 0; i < 3; ++i) {
            f[2 * i] = or_zero(a.mu[i], n);
            f[2 * i + 1] = or_zero(a.nu[i], n);
          }
      break;
    case Sector::B_pair:
      for (const auto& b : c.b)
        if (b.m == spec.m) {
          if (spec.self_pair()) {
            f[0] = or_zero(b.re_m, n);
            f[1] = or_zero(b.im_m, n);
          } else {
            f[0] = or_zero(b.re_m, n);
            f[1] = or_zero(b.re_l, n);
            f[2] = or_zero(b.im_m, n);
            f[3] = or_zero(b.im_l, n);
          }
        }
      break;
  }
  return f;
}

FormValue evaluate_I_blocks(const Profile& p, const ModeCoefficients& c) {
  validate_coefficients(p, c);
  const int k = p.params.k;
  double total = 0.0;
  for (const auto& a : c.a) {
    if (a.n == 0) {
      const BlockSpec s01 = BlockSpec::a0_01(k);
      const BlockSpec s2 = BlockSpec::a0_2(k);
      total += 2.0 * kPi * block_form(p, s01, block_fields(p, c, s01)).value;
      total += 2.0 * kPi * block_form(p, s2, block_fields(p, c, s2)).value;
    } else {
      const BlockSpec s = BlockSpec::a_n(k, a.n);
      total += kPi * block_form(p, s, block_fields(p, c, s)).value;
    }
  }
  for (const auto& b : c.b) {
    BlockSpec s;
    s.sector = Sector::B_pair;
    s.k = k;
    s.m = b.m;
    s.l = b.l;
    total += 2.0 * kPi * block_form(p, s, block_fields(p, c, s)).value;
  }
  return make_value(p, total);
}

// ---------------------------------------------------------------------------

double taper(double r, double radius) {
  if (!(radius > 0.0)) throw DomainError("taper radius must be > 0");
  return 1.0 - smooth_step((r / radius - 0.5) * 2.0);
}

KernelVectors kernel_vectors(const Profile& p, double taper_radius) {
  require_derivatives(p);
  if (!(taper_radius > 0.0 && taper_radius <= p.r().back() * (1.0 + 1e-12)))
    throw ConstraintError("taper radius must lie in (0, r_max]");
  const int n = p.nodes();
  const int k = p.params.k;
  const std::vector<double> uor = u_over_r(p);

  auto build = [&](auto&& scale) {
    std::array<ModeCoefficients, 5> out;
    RadialField u(n), v(n), du(n), dv(n), q(n);
    for (int i = 0; i < n; ++i) {
      const double s = scale(p.r()[i]);
      u[i] = s * p.u[i];
      v[i] = s * p.v[i];
      du[i] = s * p.du[i];
      dv[i] = s * p.dv[i];
      q[i] = s * uor[i];
    }
    for (auto& c : out) c.k = k;

    AMode v0;
    v0.n = 0;
    v0.mu[2] = u;
    out[0].a.push_back(v0);

    RadialField sdv(n), kq(n), mkq(n);
    for (int i = 0; i < n; ++i) {
      sdv[i] = kSqrt3 * dv[i];
      kq[i] = k * q[i];
      mkq[i] = -k * q[i];
    }
    AMode v1;
    v1.n = 1;
    v1.mu[0] = sdv;
    v1.mu[1] = du;
    v1.nu[2] = mkq;
    out[1].a.push_back(v1);

    AMode v2;
    v2.n = 1;
    v2.nu[0] = sdv;
    v2.nu[1] = du;
    v2.mu[2] = kq;
    out[2].a.push_back(v2);

    // z = u e^{ik phi} - 3v and its multiple by -i.
    RadialField m3v(n), mu(n);
    for (int i = 0; i < n; ++i) {
      m3v[i] = -3.0 * v[i];
      mu[i] = -u[i];
    }
    BPairMode b3, b4;
    b3.m = b4.m = k > 0 ? k : 0;
    b3.l = b4.l = k > 0 ? 0 : k;
    if (k > 0) {
      b3.re_m = u;
      b3.re_l = m3v;
      b4.im_m = mu;
      b4.im_l = m3v;
    } else {
      b3.re_m = m3v;
      b3.re_l = u;
      b4.im_m = m3v;
      b4.im_l = mu;
    }
    out[3].b.push_back(b3);
    out[4].b.push_back(b4);
    return out;
  };

  KernelVectors kv;
  kv.taper_radius = taper_radius;
  kv.raw = build([](double) { return 1.0; });
  kv.tapered = build([&](double r) { return taper(r, taper_radius); });
  return kv;
}

// ---------------------------------------------------------------------------

PolarField synthesize(const Profile& p, const ModeCoefficients& c, int n_phi) {
  validate_coefficients(p, c);
  if (n_phi < 4) throw DomainError("need at least 4 angular nodes");
  const int n = p.nodes();
  const int k = p.params.k;
  PolarField V;
  V.nodes = n;
  V.n_phi = n_phi;
  V.max_mode = c.max_mode();
  V.values.assign(static_cast<size_t>(n) * n_phi, Mat3{});

  for (int j = 0; j < n_phi; ++j) {
    const double phi = 2.0 * kPi * j / n_phi;
    const Frame fr = frame(k, phi);
    for (int i = 0; i < n; ++i) {
      std::array<double, 5> w{};
      for (const auto& a : c.a) {
        const double cs = std::cos(a.n * phi);
        const double sn = std::sin(a.n * phi);
        for (int q = 0; q < 3; ++q) {
          if (!a.mu[q].empty()) w[q] += a.mu[q][i] * cs;
          if (!a.nu[q].empty()) w[q] += a.nu[q][i] * sn;
        }
      }
      for (const auto& b : c.b) {
        auto add = [&](int m, const RadialField& re, const RadialField& im) {
          const double cs = std::cos(m * phi);
          const double sn = std::sin(m * phi);
          const double x = re.empty() ? 0.0 : re[i];
          const double y = im.empty() ? 0.0 : im[i];
          w[3] += x * cs - y * sn;
          w[4] += x * sn + y * cs;
        };
        add(b.m, b.re_m, b.im_m);
        if (b.m != b.l) add(b.l, b.re_l, b.im_l);
      }
      Mat3& M = V.at(i, j);
      for (int q = 0; q < 5; ++q) M += w[q] * fr.E[q].matrix();
    }
  }
  return V;
}

std::vector<double> spectral_diff_matrix(int n) {
  if (n < 2) throw DomainError("spectral differentiation needs n >= 2");
  const double h = 2.0 * kPi / n;
  std::vector<double> D(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      if (j == l) continue;
      const int d = j - l;
      const double sign = (d % 2 == 0) ? 1.0 : -1.0;
      const double x = 0.5 * d * h;
      D[static_cast<size_t>(j) * n + l] =
          n % 2 == 0 ? 0.5 * sign / std::tan(x) : 0.5 * sign / std::sin(x);
    }
  return D;
}

namespace {

// Angular derivative of a polar field at one radius.
void angular_derivative(const std::vector<double>& D, int n_phi, const Mat3* in, Mat3* out) {
  for (int j = 0; j < n_phi; ++j) {
    Mat3 s;
    const double* row = &D[static_cast<size_t>(j) * n_phi];
    for (int l = 0; l < n_phi; ++l)
      if (row[l] != 0.0)
        for (int a = 0; a < 9; ++a) s.a[a] += row[l] * in[l].a[a];
    out[j] = s;
  }
}

double frob_dot(const Mat3& x, const Mat3& y) {
  double s = 0.0;
  for (int a = 0; a < 9; ++a) s += x.a[a] * y.a[a];
  return s;
}

}  // namespace

DirectValue evaluate_I_direct(const Profile& p, const PolarField& V) {
  if (V.nodes != p.nodes()) throw PreconditionError("polar field does not match the profile grid");
  const int np = V.n_phi;
  const int k = p.params.k;
  const int needed = 8 * std::max({V.max_mode, std::abs(k), 1});
  if (np < needed)
    throw PreconditionError("angular resolution " + std::to_string(np) + " below required " +
                            std::to_string(needed));
  const RadialGrid& g = p.grid;
  const double t = p.params.t;
  const double dphi = 2.0 * kPi / np;
  const std::vector<double> D = spectral_diff_matrix(np);

  std::vector<Frame> frames;
  frames.reserve(np);
  for (int j = 0; j < np; ++j) frames.push_back(frame(k, dphi * j));
  auto coords = [&](const Mat3& M, int j) {
    std::array<double, 5> w{};
    for (int q = 0; q < 5; ++q) w[q] = frob_dot(M, frames[j].E[q].matrix());
    return w;
  };

  // Radial gradient on edges (same value for both routes up to round-off).
  double rad_raw = 0.0, rad_coord = 0.0;
  for (int e = 0; e < g.intervals(); ++e) {
    double sr = 0.0, sc = 0.0;
    for (int j = 0; j < np; ++j) {
      const Mat3 d = V.at(e + 1, j) - V.at(e, j);
      sr += d.frobenius_sq();
      const auto w1 = coords(V.at(e + 1, j), j);
      const auto w0 = coords(V.at(e, j), j);
      for (int q = 0; q < 5; ++q) sc += sq(w1[q] - w0[q]);
    }
    rad_raw += g.rmid[e] / g.h[e] * sr * dphi;
    rad_coord += g.rmid[e] / g.h[e] * sc * dphi;
  }

  double ang_raw = 0.0, ang_coord = 0.0, pot_raw = 0.0, pot_coord = 0.0;
  std::vector<Mat3> Vphi(np);
  std::vector<std::array<double, 5>> wc(np), wphi(np);
  for (int i = 0; i < g.nodes(); ++i) {
    const double r = g.r[i];
    const double u = p.u[i];
    const double v = p.v[i];
    const double q2 = 2.0 * u * u + 6.0 * v * v;
    double ar = 0.0, ac = 0.0, pr = 0.0, pc = 0.0;
    if (r > 0.0) {
      angular_derivative(D, np, &V.at(i, 0), Vphi.data());
      for (int j = 0; j < np; ++j) {
        ar += Vphi[j].frobenius_sq();
        wc[j] = coords(V.at(i, j), j);
      }
      for (int q = 0; q < 5; ++q)
        for (int j = 0; j < np; ++j) {
          double s = 0.0;
          for (int l = 0; l < np; ++l) s += D[static_cast<size_t>(j) * np + l] * wc[l][q];
          wphi[j][q] = s;
        }
      for (int j = 0; j < np; ++j) {
        const auto& w = wc[j];
        const auto& wp = wphi[j];
        ac += sq(wp[0]) + sq(k * w[2] - wp[1]) + sq(k * w[1] + wp[2]) + sq(wp[3]) + sq(wp[4]);
      }
      ar /= r * r;
      ac /= r * r;
    }
    for (int j = 0; j < np; ++j) {
      const double phi = dphi * j;
      const Mat3& M = V.at(i, j);
      const Mat3 Q = q_of_profile(u, v, k, phi).matrix();
      const double vv = M.frobenius_sq();
      const double tqv = frob_dot(Q, M);
      const double tqvv = frob_dot(Q, M * M);
      pr += -t * vv - 2.0 * tqvv + q2 * vv + 2.0 * tqv * tqv;

      QTensorCoords w;
      w.w = coords(M, j);
      const TraceForms tf = trace_forms(u, v, w, k, phi);
      pc += -t * tf.norm_sq - 2.0 * (u * tf.trF1V2 + v * tf.trF2V2) + q2 * tf.norm_sq +
            2.0 * tf.trQV * tf.trQV;
    }
    ang_raw += g.w[i] * ar * dphi;
    ang_coord += g.w[i] * ac * dphi;
    pot_raw += g.w[i] * pr * dphi;
    pot_coord += g.w[i] * pc * dphi;
  }

  DirectValue out;
  out.value = make_value(p, rad_raw + ang_raw + pot_raw);
  out.value.quadrature = "dual-cell x trapezoid(phi)";
  out.coordinate_value = rad_coord + ang_coord + pot_coord;
  return out;
}

PolarField linearized_residual(const Profile& p, const PolarField& V) {
  if (V.nodes != p.nodes()) throw PreconditionError("polar field does not match the profile grid");
  const int n = p.nodes();
  const int np = V.n_phi;
  const int k = p.params.k;
  const double t = p.params.t;
  const std::vector<double> D = spectral_diff_matrix(np);
  const double dphi = 2.0 * kPi / np;

  PolarField R;
  R.nodes = n;
  R.n_phi = np;
  R.max_mode = V.max_mode;
  R.values.assign(V.values.size(), Mat3{});

  std::vector<Mat3> d1(np), d2(np);
  for (int i = 2; i <= n - 3; ++i) {
    const double r = p.r()[i];
    const std::array<double, 5> x = {p.r()[i - 2], p.r()[i - 1], r, p.r()[i + 1], p.r()[i + 2]};
    const auto wts = fornberg_weights(r, x, 2);
    angular_derivative(D, np, &V.at(i, 0), d1.data());
    angular_derivative(D, np, d1.data(), d2.data());
    const double u = p.u[i];
    const double v = p.v[i];
    const double q2 = 2.0 * u * u + 6.0 * v * v;
    for (int j = 0; j < np; ++j) {
      Mat3 vr, vrr;
      for (int s = 0; s < 5; ++s) {
        vr += wts[1][s] * V.at(i - 2 + s, j);
        vrr += wts[2][s] * V.at(i - 2 + s, j);
      }
      const Mat3& M = V.at(i, j);
      const Mat3 Q = q_of_profile(u, v, k, dphi * j).matrix();
      const double tqv = frob_dot(Q, M);
      Mat3 L = vrr + (1.0 / r) * vr + (1.0 / (r * r)) * d2[j];
      L += t * M;
      L += Q * M + M * Q - (2.0 / 3.0 * tqv) * Mat3::identity();
      L -= q2 * M;
      L -= (2.0 * tqv) * Q;
      R.at(i, j) = L;
    }
  }
  return R;
}

double max_norm(const Profile& p, const PolarField& R, double r_lo, double r_hi) {
  double mx = 0.0;
  for (int i = 0; i < R.nodes; ++i) {
    const double r = p.r()[i];
    if (r < r_lo || r > r_hi) continue;
    for (int j = 0; j < R.n_phi; ++j) mx = std::max(mx, std::sqrt(R.at(i, j).frobenius_sq()));
  }
  return mx;
}

}  // namespace defectlab
