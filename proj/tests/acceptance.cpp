// Acceptance run: one line per criterion with its measured quantities and
// wall time against the time budget. Exit status 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "defectlab/profile.hpp"
#include "defectlab/properties.hpp"
#include "defectlab/spectral.hpp"
#include "defectlab/verify.hpp"

using namespace defectlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Outcome()> run;
};

const double kThird = 1.0 / 3.0;

Profile solve(double t, int k, int intervals, double r_max = 40.0) {
  MeshSpec m;
  m.r_max = r_max;
  m.intervals = intervals;
  return solve_profile({t, k}, m);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double interior_min(const Profile& p, auto&& f) {
  double m = INFINITY;
  for (int i = 1; i + 1 < p.nodes(); ++i) m = std::min(m, f(i));
  return m;
}

// Summary of a group of verification checks.
Outcome summarize(const VerifyReport& rep, const std::string& prefix) {
  int n = 0, failed = 0;
  double worst_order = INFINITY, worst_abs = 0.0;
  std::string first_failure;
  for (const CheckResult& c : rep.checks) {
    if (c.name.rfind(prefix, 0) != 0) continue;
    ++n;
    if (std::isfinite(c.order_estimate)) worst_order = std::min(worst_order, c.order_estimate);
    if (c.name.find("min_density") == std::string::npos) worst_abs = std::max(worst_abs, c.abs_err);
    if (!c.pass) {
      ++failed;
      if (first_failure.empty()) first_failure = c.name;
    }
  }
  Outcome o;
  o.pass = n > 0 && failed == 0;
  o.detail = std::to_string(n - failed) + "/" + std::to_string(n) + " checks";
  if (std::isfinite(worst_order)) o.detail += ", min order " + fmt(worst_order);
  o.detail += ", max abs mismatch " + fmt(worst_abs);
  if (!first_failure.empty()) o.detail += ", first failure " + first_failure;
  return o;
}

Outcome anchor() {
  const Profile p = solve(kThird, 1, 4096);
  double dev = 0.0;
  for (double v : p.v) dev = std::max(dev, std::abs(v + 1.0 / 6.0));
  return {dev <= 1e-6 && p.s_plus == 1.0,
          "max|v+1/6| = " + fmt(dev) + ", s+ = " + fmt(p.s_plus)};
}

Outcome solver_order() {
  const Profile a = solve(0.5, 1, 2048), b = solve(0.5, 1, 4096), c = solve(0.5, 1, 8192);
  auto diff = [](const Profile& coarse, const Profile& fine) {
    const int stride = fine.grid.intervals() / coarse.grid.intervals();
    double d = 0.0;
    for (int i = 0; i < coarse.nodes(); ++i) d = std::max(d, std::abs(coarse.u[i] - fine.u[stride * i]));
    return d;
  };
  const double ratio = diff(a, b) / diff(b, c);
  return {ratio >= 3.5 && ratio <= 4.5, "ratio = " + fmt(ratio)};
}

Outcome properties() {
  int ok = 0, total = 0;
  std::string failures;
  for (double t : {0.05, 0.1, kThird, 0.5, 1.0, 2.0})
    for (int k : {1, -1}) {
      ++total;
      const Profile p = solve(t, k, 4096);
      const double s = p.s_plus;
      bool good = interior_min(p, [&](int i) { return p.u[i]; }) > 0.0 &&
                  interior_min(p, [&](int i) { return -p.v[i]; }) > 0.0 &&
                  interior_min(p, [&](int i) { return -(p.u[i] + 3 * p.v[i]); }) > 0.0 &&
                  interior_min(p, [&](int i) { return s * s / 3 - p.u[i] * p.u[i] - 3 * p.v[i] * p.v[i]; }) > 0.0;
      const double regime = interior_min(p, [&](int i) {
        const double g = p.v[i] + s / 6;
        return t < kThird ? g : (t > kThird ? -g : -std::abs(g));
      });
      good = good && (t == kThird ? regime >= -1e-6 : regime > 0.0);
      good = good && interior_min(p, [&](int i) { return p.u[i] * p.du[i]; }) >= -1e-9 * s * s;
      good = good && interior_min(p, [&](int i) { return -p.dv[i] * (1 + 6 * p.v[i]); }) >= -1e-9 * s;
      good = good && check_properties(p).all_satisfied();
      if (good) {
        ++ok;
      } else {
        failures += " (t=" + fmt(t) + ",k=" + std::to_string(k) + ")";
      }
    }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " profiles" + failures};
}

// Verification groups share the N = 8192 ladder.
const Profile& fine_profile() {
  static const Profile p = solve(0.5, 1, 8192);
  return p;
}

Outcome verify_group(const std::string& group, const std::string& prefix) {
  VerifyOptions o;
  o.groups = {group};
  o.oracle_sets = 20;
  o.oracle_modes = 4;
  return summarize(run_verification(fine_profile(), o), prefix);
}

Outcome sos() {
  VerifyOptions o;
  o.groups = {"sos"};
  const VerifyReport rep = run_verification(fine_profile(), o);
  Outcome out = summarize(rep, "sos.");
  double floor = INFINITY;
  for (const CheckResult& c : rep.checks)
    if (c.name.find("min_density") != std::string::npos) floor = std::min(floor, c.lhs);
  out.detail += ", min summand density " + fmt(floor);
  return out;
}

Outcome stability() {
  int ok = 0, total = 0;
  std::string failures;
  for (double t : {0.1, kThird, 1.0})
    for (int k : {1, -1}) {
      ++total;
      const Profile p = solve(t, k, 4096);
      SweepOptions so;
      so.n_max = 8;
      so.m_max = 8;
      so.keep_vectors = false;
      const SpectralReport rep = stability_sweep(p, so);
      bool good = rep.negative_total == 0 && rep.monotone_in_n && rep.verdict == Verdict::stable;
      for (const BlockResult& b : rep.blocks) {
        good = good && b.eig.converged && b.inertia_below_shift == 0;
        for (double r : b.eig.residuals) good = good && r <= EigenOptions{}.tol;
      }
      if (good) {
        ++ok;
      } else {
        failures += " (t=" + fmt(t) + ",k=" + std::to_string(k) + ")";
      }
    }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " sweeps certified" + failures};
}

Outcome kernel() {
  VerifyOptions o;
  o.groups = {"kernel"};
  static const Profile p = solve(0.5, 1, 4096);
  const VerifyReport rep = run_verification(p, o);
  Outcome out = summarize(rep, "kernel.");
  double min_sim = INFINITY, min_ratio = INFINITY;
  for (const CheckResult& c : rep.checks) {
    if (c.name.rfind("kernel.similarity", 0) == 0) min_sim = std::min(min_sim, c.lhs);
    if (c.name.rfind("kernel.decay", 0) == 0) min_ratio = std::min(min_ratio, 1.0 / c.rel_err);
    if (c.name == "kernel.layout") out.detail += ", near-zero total " + fmt(c.lhs);
  }
  out.detail += ", min similarity " + fmt(min_sim) + ", min decay ratio " + fmt(min_ratio);
  return out;
}

Outcome instability() {
  const Profile p = solve(0.5, 2, 4096);
  SweepOptions so;
  so.keep_vectors = false;
  const SpectralReport rep = stability_sweep(p, so);
  std::string blocks;
  for (const BlockResult& b : rep.blocks)
    if (b.inertia_below_shift > 0)
      blocks += " " + b.spec.name() + "(" + std::to_string(b.inertia_below_shift) + ")";
  return {rep.negative_total >= 1, "negative directions " + std::to_string(rep.negative_total) + ":" + blocks};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "t=1/3 anchor", 10, anchor},
      {2, "solver order", 60, solver_order},
      {3, "profile properties", 120, properties},
      {4, "integral identities", 60, [] { return verify_group("identities", "identity."); }},
      {5, "sum-of-squares forms", 60, sos},
      {6, "decomposition oracle", 300, [] { return verify_group("oracle", "oracle."); }},
      {7, "stability for k=+-1", 600, stability},
      {8, "kernel dimension 5", 900, kernel},
      {9, "instability for k=2", 600, instability},
      {10, "linearized residual", 120, [] { return verify_group("residual", "residual."); }},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%2d] %-22s %s; %.1f s of %.0f s%s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
