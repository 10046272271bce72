#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "defectlab/error.hpp"
#include "defectlab/verify.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace defectlab;
using testing::profile;

TEST_CASE("convergence order of synthetic data") {
  const std::vector<double> h = {0.1, 0.05, 0.025};
  std::vector<double> e2, e4;
  for (double x : h) {
    e2.push_back(3.0 * x * x);
    e4.push_back(0.5 * std::pow(x, 4));
  }
  CHECK(convergence_order(h, e2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(convergence_order(h, e4) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("check lists") {
  CHECK(parse_check_list("all") == check_groups());
  CHECK(parse_check_list("sos,identities") == std::vector<std::string>{"sos", "identities"});
  CHECK_THROWS_AS(parse_check_list(""), UsageError);
  CHECK_THROWS_AS(parse_check_list("sos,"), UsageError);
  CHECK_THROWS_AS(parse_check_list("spectra"), UsageError);
}

TEST_CASE("refinement ladder") {
  const Profile& p = profile(0.5, 1, 1024);
  const std::vector<Profile> ladder = refinement_ladder(p, 3);
  REQUIRE(ladder.size() == 3);
  CHECK(ladder[0].grid.intervals() == 256);
  CHECK(ladder[1].grid.intervals() == 512);
  CHECK(ladder[2].grid.intervals() == 1024);
  for (const Profile& q : ladder) CHECK(q.converged);
  CHECK_THROWS(refinement_ladder(profile(0.5, 1, 256), 4));
}

TEST_CASE("verification of a stable profile") {
  const Profile& p = profile(0.5, 1, 2048);
  VerifyOptions o;
  o.groups = {"identities", "sos", "oracle", "residual"};
  o.oracle_sets = 5;
  o.abs_tol = 1e-5;
  const VerifyReport rep = run_verification(p, o);
  CHECK(rep.level_intervals == std::vector<int>{512, 1024, 2048});
  for (const CheckResult& c : rep.checks) {
    CAPTURE(c.name);
    CAPTURE(c.order_estimate);
    CHECK(c.pass);
  }
  CHECK(rep.all_pass());

  int identities = 0, oracle = 0;
  for (const CheckResult& c : rep.checks) {
    identities += c.name.rfind("identity.", 0) == 0;
    oracle += c.name.rfind("oracle.", 0) == 0;
  }
  CHECK(identities == 15);
  CHECK(oracle == 5);

  const auto j = nlohmann::json::parse(verification_json(rep));
  CHECK(j["checks"].size() == rep.checks.size());
  CHECK(j["all_pass"] == true);
}

TEST_CASE("failed checks are reported") {
  const Profile& p = profile(0.5, 1, 1024);
  VerifyOptions o;
  o.groups = {"identities"};
  o.min_order = 10.0;
  const VerifyReport rep = run_verification(p, o);
  CHECK_FALSE(rep.all_pass());
}
