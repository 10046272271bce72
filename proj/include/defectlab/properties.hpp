#pragma once

// Qualitative properties of a radial profile, with signed margins over the
// interior nodes 0 < r < r_max.
//
//   H1  u > 0, v < 0, u + 3v < 0, u^2 + 3v^2 < s+^2/3
//   H2  t < 1/3:  v > -s+/6
//   H3  t > 1/3:  v < -s+/6
//   H4  t = 1/3:  v = -s+/6
//   H5  p = u u' >= 0,  q = -v'(1 + 6v) >= 0

#include <string>
#include <vector>

#include "defectlab/profile.hpp"

namespace defectlab {

struct PropertyCheck {
  std::string name;
  bool satisfied = false;
  bool boundary = false;  // |margin| within the +/-1e-9 band
  double margin = 0.0;    // worst-case signed value; > 0 (or >= -tol) is good
  int node = -1;
  double r = 0.0;
};

enum class Regime { below_third, third, above_third };

const char* to_string(Regime r);
Regime regime_of(double t);

struct PropertyReport {
  Regime regime = Regime::third;
  std::vector<PropertyCheck> checks;

  bool all_satisfied() const;
  const PropertyCheck* find(const std::string& name) const;
};

// Strict inequalities need margin > kStrictMargin; the H4 equality needs
// |v + s+/6| <= kEqualityTol; H5 allows -1e-9 s+^2 (p) and -1e-9 s+ (q).
inline constexpr double kStrictMargin = 1e-9;
inline constexpr double kEqualityTol = 1e-6;

PropertyReport check_properties(const Profile& p);

enum class Direction { increasing, decreasing, constant, mixed };

const char* to_string(Direction d);

struct MonotonicityReport {
  bool u_strictly_increasing = false;
  double min_du = 0.0;
  Direction v_direction = Direction::mixed;
  bool v_strict = false;
  double min_dv = 0.0;
  double max_dv = 0.0;
  // Direction implied by H2/H3 together with H5: decreasing below t = 1/3,
  // increasing above, constant at 1/3.
  bool v_direction_consistent = false;
};

MonotonicityReport strict_monotonicity(const Profile& p);

}  // namespace defectlab
