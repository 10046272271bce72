#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "defectlab/error.hpp"
#include "defectlab/properties.hpp"
#include "support.hpp"

using namespace defectlab;
using testing::kThird;
using testing::profile;

namespace {

double interior_min(const Profile& p, auto&& f) {
  double m = INFINITY;
  for (int i = 1; i + 1 < p.nodes(); ++i) m = std::min(m, f(i));
  return m;
}

}  // namespace

TEST_CASE("regime classification") {
  CHECK(regime_of(0.1) == Regime::below_third);
  CHECK(regime_of(1.0 / 3.0) == Regime::third);
  CHECK(regime_of(0.3333333333333333) == Regime::third);
  CHECK(regime_of(0.34) == Regime::above_third);
  CHECK(std::string(to_string(Regime::below_third)) == "t<1/3");
}

TEST_CASE("all properties hold across temperatures and both windings") {
  for (double t : {0.05, 0.1, kThird, 0.5, 1.0, 2.0})
    for (int k : {1, -1}) {
      const Profile& p = profile(t, k);
      CAPTURE(t);
      CAPTURE(k);
      const PropertyReport rep = check_properties(p);
      CHECK(rep.all_satisfied());
      CHECK(rep.regime == regime_of(t));
      const double s = p.s_plus;

      // Margins recomputed independently.
      CHECK(rep.find("H1.u_positive")->margin == interior_min(p, [&](int i) { return p.u[i]; }));
      CHECK(rep.find("H1.v_negative")->margin == interior_min(p, [&](int i) { return -p.v[i]; }));
      CHECK(rep.find("H1.u_plus_3v_negative")->margin ==
            doctest::Approx(interior_min(p, [&](int i) { return -(p.u[i] + 3 * p.v[i]); })));
      CHECK(rep.find("H1.norm_bound")->margin ==
            doctest::Approx(interior_min(
                p, [&](int i) { return s * s / 3 - p.u[i] * p.u[i] - 3 * p.v[i] * p.v[i]; })));
      for (const char* h1 : {"H1.u_positive", "H1.v_negative", "H1.u_plus_3v_negative", "H1.norm_bound"})
        CHECK(rep.find(h1)->margin > 0.0);

      const double pmin = interior_min(p, [&](int i) { return p.u[i] * p.du[i]; });
      const double qmin = interior_min(p, [&](int i) { return -p.dv[i] * (1 + 6 * p.v[i]); });
      CHECK(pmin >= -1e-9 * s * s);
      CHECK(qmin >= -1e-9 * s);
      CHECK(rep.find("H5.p")->margin == doctest::Approx(pmin));
      CHECK(rep.find("H5.q")->margin == doctest::Approx(qmin).epsilon(1e-9).scale(1e-20));

      if (t < kThird) {
        CHECK(rep.find("H2") != nullptr);
        CHECK(interior_min(p, [&](int i) { return p.v[i] + s / 6; }) > 0.0);
      } else if (t > kThird) {
        CHECK(rep.find("H3") != nullptr);
        CHECK(interior_min(p, [&](int i) { return -(p.v[i] + s / 6); }) > 0.0);
      } else {
        CHECK(rep.find("H4") != nullptr);
        CHECK(std::abs(rep.find("H4")->margin) <= 1e-6);
      }

      // Reproducible bit for bit.
      const PropertyReport again = check_properties(p);
      REQUIRE(again.checks.size() == rep.checks.size());
      for (size_t j = 0; j < rep.checks.size(); ++j) {
        CHECK(again.checks[j].margin == rep.checks[j].margin);
        CHECK(again.checks[j].node == rep.checks[j].node);
      }
    }
}

TEST_CASE("isotropic dummy profile fails H1 with zero margin") {
  Profile p = profile(0.5, 1, 256);
  std::fill(p.u.begin(), p.u.end(), 0.0);
  std::fill(p.v.begin(), p.v.end(), 0.0);
  differentiate(p);
  const PropertyReport rep = check_properties(p);
  CHECK_FALSE(rep.all_satisfied());
  for (const char* h1 : {"H1.u_positive", "H1.v_negative", "H1.u_plus_3v_negative"}) {
    const PropertyCheck* c = rep.find(h1);
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->satisfied);
    CHECK(c->margin == 0.0);
    CHECK(c->boundary);
  }
}

TEST_CASE("missing derivatives are a precondition error") {
  Profile p = profile(0.5, 1, 256);
  p.du.clear();
  CHECK_THROWS_AS(check_properties(p), PreconditionError);
}

TEST_CASE("monotonicity") {
  const MonotonicityReport cold = strict_monotonicity(profile(0.1, 1));
  CHECK(cold.u_strictly_increasing);
  CHECK(cold.v_direction == Direction::decreasing);
  CHECK(cold.v_strict);
  CHECK(cold.v_direction_consistent);

  const MonotonicityReport warm = strict_monotonicity(profile(1.0, 1));
  CHECK(warm.v_direction == Direction::increasing);
  CHECK(warm.v_direction_consistent);

  const Profile& third = profile(kThird, 1);
  const MonotonicityReport flat = strict_monotonicity(third);
  CHECK(flat.v_direction == Direction::constant);
  for (double dv : third.dv) CHECK(std::abs(dv) <= 1e-6);

  Profile wavy = profile(0.5, 1, 256);
  for (int i = 0; i < wavy.nodes(); ++i) wavy.u[i] += 0.05 * std::sin(wavy.r()[i]);
  differentiate(wavy);
  CHECK_FALSE(strict_monotonicity(wavy).u_strictly_increasing);
}
