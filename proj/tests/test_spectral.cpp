#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "defectlab/error.hpp"
#include "defectlab/spectral.hpp"
#include "support.hpp"

using namespace defectlab;
using testing::kThird;
using testing::profile;

namespace {

Eigen::MatrixXd dense(const BandedSym& a) {
  const int n = a.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - a.half_bandwidth()); j <= std::min(n - 1, i + a.half_bandwidth()); ++j)
      d(i, j) = a.get(i, j);
  return d;
}

// First positive zero of J_1 by bisection.
double bessel_j1_zero() {
  double lo = 3.0, hi = 4.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::cyl_bessel_j(1.0, lo) * std::cyl_bessel_j(1.0, mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<BlockSpec> every_block_type(int k) {
  return {BlockSpec::a0_01(k), BlockSpec::a0_2(k), BlockSpec::a_n(k, 1), BlockSpec::a_n(k, 3),
          BlockSpec::b_pair(k, 1), BlockSpec::b_pair(k, 2)};
}

}  // namespace

TEST_CASE("identity pencil") {
  const int n = 50;
  BandedSym A(n, 2);
  std::vector<double> M(n);
  for (int i = 0; i < n; ++i) {
    M[i] = 1.0 + 0.1 * i;
    A.set(i, i, M[i]);
  }
  EigenOptions o;
  o.count = 3;
  const EigenPairs e = eig_smallest(A, M, o);
  REQUIRE(e.converged);
  for (double v : e.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(inertia_count(A, M, 0.5).count == 0);
  CHECK(inertia_count(A, M, 1.5).count == n);
}

TEST_CASE("Dirichlet Laplacian with angular index one matches the Bessel zero") {
  const double R = 40.0;
  const RadialGrid g = RadialGrid::build(MeshSpec{R, 4096});
  const int n = g.intervals() - 1;  // nodes 1 .. N-1
  BandedSym A(n, 1);
  std::vector<double> M(n);
  for (int e = 0; e < g.intervals(); ++e) {
    const double c = g.rmid[e] / g.h[e];
    const int a = e - 1, b = e;  // dof of node e is e - 1
    if (a >= 0) A.add(a, a, c);
    if (b < n) A.add(b, b, c);
    if (a >= 0 && b < n) A.add(b, a, -c);
  }
  for (int i = 1; i < g.intervals(); ++i) {
    M[i - 1] = g.w[i];
    A.add(i - 1, i - 1, g.w[i] / (g.r[i] * g.r[i]));
  }
  EigenOptions o;
  o.count = 2;
  const EigenPairs e = eig_smallest(A, M, o);
  REQUIRE(e.converged);
  const double j11 = bessel_j1_zero();
  CHECK(j11 == doctest::Approx(3.8317059702075).epsilon(1e-12));
  CHECK(e.values[0] == doctest::Approx(std::pow(j11 / R, 2)).epsilon(5e-3));
  CHECK(inertia_count(A, M, 0.5 * (e.values[0] + e.values[1])).count == 1);
}

TEST_CASE("smallest eigenpairs against a dense generalized solver") {
  const Profile& p = profile(0.5, 1, 128, 10.0);
  for (const BlockSpec& spec : every_block_type(1)) {
    CAPTURE(spec.name());
    const Pencil pen = assemble_block(p, spec);
    const Eigen::MatrixXd A = dense(pen.A);
    const Eigen::VectorXd M = Eigen::Map<const Eigen::VectorXd>(pen.M.data(), pen.size());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, Eigen::MatrixXd(M.asDiagonal()));
    EigenOptions o;
    o.count = 4;
    const EigenPairs e = eig_smallest(pen, o);
    REQUIRE(e.converged);
    REQUIRE(e.values.size() == 4);
    for (int j = 0; j < 4; ++j) {
      CHECK(e.values[j] == doctest::Approx(ges.eigenvalues()(j)).epsilon(1e-8).scale(1e-10));
      CHECK(e.residuals[j] <= o.tol);
      if (j) CHECK(e.values[j] >= e.values[j - 1]);
      for (int l = 0; l < 4; ++l) {
        const double ip = pen.m_dot(e.vectors[j], e.vectors[l]);
        CHECK(std::abs(ip - (j == l ? 1.0 : 0.0)) < 1e-10);
      }
    }
  }
}

TEST_CASE("assembled matrices reproduce the block forms") {
  for (int k : {1, -1, 2}) {
    const Profile& p = profile(0.5, k, 512);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (const BlockSpec& spec : every_block_type(k)) {
      CAPTURE(spec.name());
      const Pencil pen = assemble_block(p, spec);
      std::vector<double> x(pen.size());
      for (double& xi : x) xi = g(rng);
      const auto fields = pen.embed(x);
      const double form = block_form(p, spec, fields).value;
      CHECK(pen.A.quadratic_form(x) == doctest::Approx(form).epsilon(1e-12));
      const auto back = pen.extract(fields);
      for (int d = 0; d < pen.size(); ++d) CHECK(back[d] == doctest::Approx(x[d]).epsilon(1e-12));
    }
  }
}

TEST_CASE("inertia agrees with the computed eigenvalues") {
  const Profile& p = profile(0.5, 1, 1024);
  for (const BlockSpec& spec : every_block_type(1)) {
    CAPTURE(spec.name());
    const Pencil pen = assemble_block(p, spec);
    EigenOptions o;
    o.count = 5;
    const EigenPairs e = eig_smallest(pen, o);
    REQUIRE(e.converged);
    CHECK(inertia_below(pen, 0.5 * (e.values[3] + e.values[4])) == 4);
    CHECK(inertia_below(pen, e.values[0] - 1e-3 * std::abs(e.values[0]) - 1e-12) == 0);
  }
}

TEST_CASE("stable defect: nonnegative blocks and no eigenvalues in the gap") {
  const Profile& p = profile(0.5, 1);
  const Pencil a001 = assemble_block(p, BlockSpec::a0_01(1));
  const EigenPairs e = eig_smallest(a001, {});
  CHECK(e.values[0] >= -1e-6);

  const Pencil a4 = assemble_block(p, BlockSpec::a_n(1, 4));
  CHECK(inertia_below(a4, 1e-4) - inertia_below(a4, -1e-6) == 0);
  CHECK(inertia_below(a4, -1e-6) == 0);
}

TEST_CASE("degree-two defect has a negative direction") {
  const Profile& p = profile(0.5, 2);
  const BlockSpec spec = BlockSpec::b_pair(2, 1);
  CHECK(spec.name() == "B(1,1)");
  const Pencil pen = assemble_block(p, spec);
  CHECK(inertia_below(pen, -1e-8) >= 1);
  EigenOptions o;
  o.count = 2;
  const EigenPairs e = eig_smallest(pen, o);
  CHECK(e.values[0] < -1e-8);
}

TEST_CASE("winding sign does not change the spectra") {
  SweepOptions so;
  so.n_max = 3;
  so.m_max = 3;
  so.keep_vectors = false;
  const SpectralReport a = stability_sweep(profile(0.5, 1, 1024), so);
  const SpectralReport b = stability_sweep(profile(0.5, -1, 1024), so);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (size_t j = 0; j < a.blocks.size(); ++j) {
    CAPTURE(a.blocks[j].spec.name());
    REQUIRE(a.blocks[j].eig.values.size() == b.blocks[j].eig.values.size());
    for (size_t q = 0; q < a.blocks[j].eig.values.size(); ++q)
      CHECK(a.blocks[j].eig.values[q] ==
            doctest::Approx(b.blocks[j].eig.values[q]).epsilon(1e-8).scale(1e-10));
  }
  CHECK(a.verdict == Verdict::stable);
  CHECK(b.verdict == Verdict::stable);
  CHECK(a.negative_total == 0);
  CHECK(a.monotone_in_n);
}

TEST_CASE("sweep at t = 1/3 and k = 2") {
  SweepOptions so;
  so.n_max = 2;
  so.m_max = 2;
  so.keep_vectors = false;
  const SpectralReport third = stability_sweep(profile(kThird, 1, 1024), so);
  CHECK(third.verdict == Verdict::stable);
  for (const BlockResult& b : third.blocks) CHECK(b.inertia_below_shift == 0);

  const SpectralReport two = stability_sweep(profile(0.5, 2, 1024), so);
  CHECK(two.verdict == Verdict::unstable);
  REQUIRE(two.find("B(1,1)") != nullptr);
  CHECK(two.find("B(1,1)")->inertia_below_shift >= 1);
}

TEST_CASE("seeded iterations are reproducible") {
  const Profile& p = profile(0.5, 1, 1024);
  const Pencil pen = assemble_block(p, BlockSpec::a_n(1, 1));
  EigenOptions o;
  o.seed = 42;
  const EigenPairs a = eig_smallest(pen, o);
  const EigenPairs b = eig_smallest(pen, o);
  REQUIRE(a.values.size() == b.values.size());
  for (size_t j = 0; j < a.values.size(); ++j) {
    CHECK(a.values[j] == b.values[j]);
    CHECK(a.vectors[j] == b.vectors[j]);
  }
  o.seed = 7;
  const EigenPairs c = eig_smallest(pen, o);
  for (size_t j = 0; j < a.values.size(); ++j)
    CHECK(c.values[j] == doctest::Approx(a.values[j]).epsilon(1e-8).scale(1e-10));
}

TEST_CASE("kernel vectors sit in the near-zero eigenspaces") {
  const Profile& p = profile(0.5, 1, 2048);
  SweepOptions so;
  so.n_max = 2;
  so.m_max = 2;
  const SpectralReport rep = stability_sweep(p, so);
  const KernelMatch km = kernel_match(p, rep);
  CHECK(km.expected_layout);
  CHECK(km.total == 5);
  REQUIRE(km.scores.size() == 5);
  for (const KernelScore& s : km.scores) {
    CAPTURE(s.vector);
    CHECK(s.similarity >= 0.99);
  }
  CHECK(kernel_pair_block(1).name() == "B(1,0)");
}

TEST_CASE("malformed inputs") {
  const Profile& p = profile(0.5, 1, 256);
  CHECK_THROWS_AS(assemble_block(p, BlockSpec::a0_01(2)), PreconditionError);
  BandedSym A(3, 1);
  for (int i = 0; i < 3; ++i) A.set(i, i, 1.0);
  const std::vector<double> bad_mass = {1.0, -1.0, 1.0};
  CHECK_THROWS(inertia_count(A, bad_mass, 0.0));
  CHECK_THROWS_AS(BlockSpec::a_n(1, 0).validate(), DomainError);
}
