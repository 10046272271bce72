#pragma once

// Numerical verification of a profile and its second variation: integral
// identities, sum-of-squares forms, the block decomposition against a direct
// 2-D quadrature, linearized residuals of the kernel vectors, and the kernel
// layout of the spectral blocks.
//
// Refinement checks re-solve the profile on meshes with 2^j times fewer
// intervals and fit the order as the least-squares slope of log(error)
// against log(h).

#include <cstdint>
#include <string>
#include <vector>

#include "defectlab/profile.hpp"

namespace defectlab {

struct CheckResult {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double order_estimate = 0.0;  // NaN when no refinement is involved or the error is at round-off
  bool pass = false;
};

// Check groups: identities, sos, oracle, residual, kernel.
const std::vector<std::string>& check_groups();
// "all" or a comma-separated list of groups; throws UsageError on an empty
// or unknown entry.
std::vector<std::string> parse_check_list(const std::string& list);

struct VerifyOptions {
  std::vector<std::string> groups = check_groups();
  int levels = 3;            // finest mesh plus levels - 1 coarsenings
  double min_order = 1.9;
  double abs_tol = 1e-6;     // identity mismatch at the finest level
  double sos_floor = -1e-10; // smallest allowed SOS summand density
  int oracle_sets = 20;
  int oracle_modes = 4;      // n, m <= oracle_modes
  int n_max = 8;             // kernel sweep
  int m_max = 8;
  bool kernel_decay = true;  // also double r_max for the kernel eigenvalues
  std::uint64_t seed = 0;
};

struct VerifyReport {
  BulkParams params;
  MeshSpec mesh;
  std::vector<int> level_intervals;
  std::vector<CheckResult> checks;

  bool all_pass() const;
};

// Profiles on the refinement ladder, finest (the given profile) last.
std::vector<Profile> refinement_ladder(const Profile& finest, int levels);

// Least-squares slope of log(err) against log(h).
double convergence_order(const std::vector<double>& h, const std::vector<double>& err);

VerifyReport run_verification(const Profile& p, const VerifyOptions& opts = {});

std::string verification_json(const VerifyReport& rep);

}  // namespace defectlab
