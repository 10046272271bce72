#pragma once

// Quadratic forms and integral identities of the second variation at a radial
// profile, evaluated on grid functions.
//
// Discrete conventions shared by every form (and by the spectral pencils):
//   * squared radial derivatives live on edges:  sum_e rmid_e / h_e (f_{e+1} - f_e)^2
//   * all other terms are nodal:                 sum_i w_i g_i   (dual-cell weights)
//   * terms carrying 1/r^p vanish at the r = 0 node; fields multiplying them
//     must be regular there (checked where a form could silently drop a term).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "defectlab/profile.hpp"
#include "defectlab/qtensor.hpp"

namespace defectlab {

using RadialField = std::vector<double>;

// Coefficients of the block integrands at one node.
struct LocalCoefficients {
  double r = 0.0;
  double inv_r2 = 0.0;  // 0 at r = 0
  double u = 0.0;
  double v = 0.0;
  double du = 0.0;
  double dv = 0.0;
  double p0 = 0.0;   // 18v^2 + 2u^2 - t - 2v            (w0 direction)
  double p1 = 0.0;   // 6v^2 + 6u^2 - t + 2v             (w1, without k^2/r^2)
  double p2 = 0.0;   // 6v^2 + 2u^2 - t + 2v             (w2, without k^2/r^2)
  double pb = 0.0;   // 6v^2 + 2u^2 - t - v              (w3, w4)
  double c01 = 0.0;  // 4u/sqrt(3) (1 + 6v)              (w0 w1 coupling)
};

LocalCoefficients local_coefficients(const Profile& p, int i);

struct FormValue {
  double value = 0.0;
  std::string quadrature = "dual-cell";
  double grid_spacing = 0.0;  // largest edge
};

// Smooth 0 -> 1 transition on [0, 1], C-infinity, flat at both ends.
double smooth_step(double x);

// Compactly supported radial test function on a profile grid. Samples vanish
// at r = 0 and at r_max and outside [r_of(lo), r_of(hi)].
class TestFunction {
public:
  static TestFunction from_samples(const RadialGrid& grid, std::vector<double> samples);

  // exp(-((r - center)/width)^2) times a C-infinity bump that is exactly zero
  // outside [lo, hi].
  static TestFunction gaussian_bump(const RadialGrid& grid, double center, double width,
                                    double lo, double hi);

  // 1 on [a + ramp, b - ramp], smooth ramps, 0 outside [a, b].
  static TestFunction plateau(const RadialGrid& grid, double a, double b, double ramp);

  const std::vector<double>& samples() const { return f_; }
  std::span<const double> span() const { return f_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }

private:
  std::vector<double> f_;
  int lo_ = 0;
  int hi_ = 0;
};

enum class Identity { A, B, C, D, E };

const char* to_string(Identity id);

struct IdentityPair {
  FormValue lhs;
  FormValue rhs;
  bool precision_warning = false;  // D/E with support reaching the first cells
};

IdentityPair identity_pair(const Profile& p, Identity which, const TestFunction& eta);

// Printed reduced second variation J(eta, xi) with w0-type coefficient on eta
// and w1-type coefficient on xi.
FormValue reduced_second_variation_J(const Profile& p, std::span<const double> eta,
                                     std::span<const double> xi);

// ---------------------------------------------------------------------------
// Fourier blocks.

enum class Sector { A0_01, A0_2, A_n, B_pair };

const char* to_string(Sector s);

// One block of the angular decomposition.
//   A0_01 : [mu0^(0), mu0^(1)]
//   A0_2  : [mu0^(2)]
//   A_n   : [mu^(0), nu^(0), mu^(1), nu^(1), mu^(2), nu^(2)]
//   B_pair: [Re z_m, Re z_l, Im z_m, Im z_l] with m + l = k, or [Re z_m, Im z_m]
//           when m == l.
struct BlockSpec {
  Sector sector = Sector::A0_01;
  int k = 1;
  int n = 0;  // A_n
  int m = 0;  // B_pair
  int l = 0;

  static BlockSpec a0_01(int k);
  static BlockSpec a0_2(int k);
  static BlockSpec a_n(int k, int n);
  // j >= 1 enumerates the unordered pairs {m, k - m} with m >= ceil(k/2).
  static BlockSpec b_pair(int k, int j);

  int field_count() const;
  bool self_pair() const { return sector == Sector::B_pair && m == l; }
  int pair_index() const;  // inverse of b_pair()
  std::string name() const;
  void validate() const;

  // Linear combinations of fields allowed to be nonzero at r = 0 (smoothness
  // of V at the origin). Every other direction is pinned there.
  std::vector<std::vector<double>> origin_modes() const;
};

// Printed radial integrand of the block (per-pi normalization for A_n,
// per-2pi for A0_* and B_pair, as written in the mode expansion).
FormValue block_form(const Profile& p, const BlockSpec& spec,
                     std::span<const RadialField> fields);

// ---------------------------------------------------------------------------
// Sum-of-squares reformulations.

enum class SosVariant { B, A1 };

struct SosResult {
  FormValue direct;
  FormValue sos;
  std::vector<double> summands;       // integral of each SOS summand
  std::vector<double> min_densities;  // pointwise minimum of each summand density
};

// Variant B: inputs (zeta, eta), q0 = v zeta, q1 = u eta, direct form of the
// (k, 0) pair (k^2 / r^2 on q1).
// Variant A1: inputs (xi, eta, zeta), a0 = v' xi, a1 = u' eta, a2 = u zeta / r.
// Requires |k| = 1.
SosResult sos_forms(const Profile& p, SosVariant variant,
                    std::span<const std::span<const double>> inputs);

// ---------------------------------------------------------------------------
// Mode coefficients of a perturbation V = sum w_i E_i.

struct AMode {
  int n = 0;
  std::array<RadialField, 3> mu;  // empty means zero
  std::array<RadialField, 3> nu;  // unused for n = 0
};

struct BPairMode {
  int m = 0;
  int l = 0;
  RadialField re_m, im_m, re_l, im_l;  // empty means zero
};

struct ModeCoefficients {
  int k = 1;
  std::vector<AMode> a;
  std::vector<BPairMode> b;

  int max_mode() const;
};

// Random smooth fields supported in [r_lo, r_hi] for modes n <= n_max and
// pair indices j <= m_max.
ModeCoefficients random_coefficients(const Profile& p, int n_max, int m_max,
                                     std::uint64_t seed, double r_lo, double r_hi);

// Fields of one block taken out of a coefficient set (zeros where absent).
std::vector<RadialField> block_fields(const Profile& p, const ModeCoefficients& c,
                                      const BlockSpec& spec);

// Sum of block forms with the angular factors 2 pi (n = 0 and B pairs) and
// pi (n >= 1).
FormValue evaluate_I_blocks(const Profile& p, const ModeCoefficients& c);

// Kernel of the second variation generated by rotations (V0, V3, V4) and
// translations (V1, V2).
struct KernelVectors {
  std::array<ModeCoefficients, 5> raw;
  std::array<ModeCoefficients, 5> tapered;
  double taper_radius = 0.0;
};

// Taper chi(r / R): 1 on [0, R/2], 0 beyond R.
double taper(double r, double radius);

KernelVectors kernel_vectors(const Profile& p, double taper_radius);

// ---------------------------------------------------------------------------
// Tensor fields on the polar grid r_i x phi_j, phi_j = 2 pi j / n_phi.

struct PolarField {
  int nodes = 0;
  int n_phi = 0;
  int max_mode = 0;
  std::vector<Mat3> values;  // index i * n_phi + j

  const Mat3& at(int i, int j) const { return values[static_cast<size_t>(i) * n_phi + j]; }
  Mat3& at(int i, int j) { return values[static_cast<size_t>(i) * n_phi + j]; }
};

PolarField synthesize(const Profile& p, const ModeCoefficients& c, int n_phi);

struct DirectValue {
  FormValue value;            // raw entrywise gradient route
  double coordinate_value = 0.0;  // frame-coordinate gradient formula
};

// Tensor-product quadrature of |grad V|^2 - t|V|^2 - 2 tr(QV^2) + |Q|^2|V|^2 + 2 tr(QV)^2.
// Requires n_phi >= 8 * max_mode.
DirectValue evaluate_I_direct(const Profile& p, const PolarField& V);

// Periodic spectral differentiation matrix on n points.
std::vector<double> spectral_diff_matrix(int n);

// Linearized Euler-Lagrange operator at Q applied to V:
//   lap V + t V + (QV + VQ - 2/3 tr(QV) I) - |Q|^2 V - 2 Q tr(QV),
// fourth-order in r, spectral in phi. Rows with i < 2 or i > N - 2 are zero.
PolarField linearized_residual(const Profile& p, const PolarField& V);

// max |R(r_i, phi_j)|_F over r_i in [r_lo, r_hi].
double max_norm(const Profile& p, const PolarField& R, double r_lo, double r_hi);

}  // namespace defectlab
