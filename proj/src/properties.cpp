#include "defectlab/properties.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "defectlab/error.hpp"

namespace defectlab {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::below_third: return "t<1/3";
    case Regime::third: return "t=1/3";
    case Regime::above_third: return "t>1/3";
  }
  return "?";
}

Regime regime_of(double t) {
  if (std::abs(t - 1.0 / 3.0) <= 1e-12) return Regime::third;
  return t < 1.0 / 3.0 ? Regime::below_third : Regime::above_third;
}

bool PropertyReport::all_satisfied() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.satisfied; });
}

const PropertyCheck* PropertyReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

// Minimum of f over interior nodes; first occurrence wins on ties.
PropertyCheck minimum(const Profile& p, const std::string& name,
                      const std::function<double(int)>& f) {
  PropertyCheck c;
  c.name = name;
  c.margin = std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < p.nodes(); ++i) {
    const double m = f(i);
    if (m < c.margin) {
      c.margin = m;
      c.node = i;
    }
  }
  if (c.node >= 0) c.r = p.r()[c.node];
  c.boundary = std::abs(c.margin) <= kStrictMargin;
  return c;
}

PropertyCheck strict(const Profile& p, const std::string& name,
                     const std::function<double(int)>& f) {
  PropertyCheck c = minimum(p, name, f);
  c.satisfied = c.margin > kStrictMargin;
  return c;
}

PropertyCheck nonneg(const Profile& p, const std::string& name, double tol,
                     const std::function<double(int)>& f) {
  PropertyCheck c = minimum(p, name, f);
  c.satisfied = c.margin >= -tol;
  return c;
}

}  // namespace

PropertyReport check_properties(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("check_properties needs a differentiated profile");
  if (p.nodes() < 3) throw PreconditionError("check_properties needs interior nodes");
  const double s = p.s_plus;
  const auto& u = p.u;
  const auto& v = p.v;
  PropertyReport rep;
  rep.regime = regime_of(p.params.t);

  rep.checks.push_back(strict(p, "H1.u_positive", [&](int i) { return u[i]; }));
  rep.checks.push_back(strict(p, "H1.v_negative", [&](int i) { return -v[i]; }));
  rep.checks.push_back(strict(p, "H1.u_plus_3v_negative", [&](int i) { return -(u[i] + 3.0 * v[i]); }));
  rep.checks.push_back(strict(p, "H1.norm_bound",
                              [&](int i) { return s * s / 3.0 - u[i] * u[i] - 3.0 * v[i] * v[i]; }));

  switch (rep.regime) {
    case Regime::below_third:
      rep.checks.push_back(strict(p, "H2", [&](int i) { return v[i] + s / 6.0; }));
      break;
    case Regime::above_third:
      rep.checks.push_back(strict(p, "H3", [&](int i) { return -s / 6.0 - v[i]; }));
      break;
    case Regime::third: {
      PropertyCheck c;
      c.name = "H4";
      c.margin = 0.0;
      for (int i = 1; i + 1 < p.nodes(); ++i) {
        const double d = v[i] + s / 6.0;
        if (c.node < 0 || std::abs(d) > std::abs(c.margin)) {
          c.margin = d;
          c.node = i;
        }
      }
      c.r = p.r()[c.node];
      c.satisfied = std::abs(c.margin) <= kEqualityTol;
      c.boundary = std::abs(c.margin) <= kStrictMargin;
      rep.checks.push_back(c);
      break;
    }
  }

  rep.checks.push_back(nonneg(p, "H5.p", 1e-9 * s * s, [&](int i) { return u[i] * p.du[i]; }));
  rep.checks.push_back(
      nonneg(p, "H5.q", 1e-9 * s, [&](int i) { return -p.dv[i] * (1.0 + 6.0 * v[i]); }));
  return rep;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::increasing: return "increasing";
    case Direction::decreasing: return "decreasing";
    case Direction::constant: return "constant";
    case Direction::mixed: return "mixed";
  }
  return "?";
}

MonotonicityReport strict_monotonicity(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("strict_monotonicity needs a differentiated profile");
  MonotonicityReport m;
  m.min_du = std::numeric_limits<double>::infinity();
  m.min_dv = std::numeric_limits<double>::infinity();
  m.max_dv = -std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < p.nodes(); ++i) {
    m.min_du = std::min(m.min_du, p.du[i]);
    m.min_dv = std::min(m.min_dv, p.dv[i]);
    m.max_dv = std::max(m.max_dv, p.dv[i]);
  }
  m.u_strictly_increasing = m.min_du > kStrictMargin;
  if (std::max(std::abs(m.min_dv), std::abs(m.max_dv)) <= kEqualityTol) {
    m.v_direction = Direction::constant;
    m.v_strict = false;
  } else if (m.min_dv > kStrictMargin) {
    m.v_direction = Direction::increasing;
    m.v_strict = true;
  } else if (m.max_dv < -kStrictMargin) {
    m.v_direction = Direction::decreasing;
    m.v_strict = true;
  } else if (m.min_dv >= -kStrictMargin) {
    m.v_direction = Direction::increasing;
  } else if (m.max_dv <= kStrictMargin) {
    m.v_direction = Direction::decreasing;
  } else {
    m.v_direction = Direction::mixed;
  }
  switch (regime_of(p.params.t)) {
    case Regime::below_third: m.v_direction_consistent = m.v_direction == Direction::decreasing; break;
    case Regime::above_third: m.v_direction_consistent = m.v_direction == Direction::increasing; break;
    case Regime::third: m.v_direction_consistent = m.v_direction == Direction::constant; break;
  }
  return m;
}

}  // namespace defectlab
