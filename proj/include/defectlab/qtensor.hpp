#pragma once

// Tensor algebra for the Landau-de Gennes order parameter restricted to the
// radial ansatz Q = u F1(k phi) + v F2, and the phi-dependent orthonormal
// frame E0..E4 used to expand perturbations.

#include <array>

namespace defectlab {

// Dense 3x3 matrix, row-major.
struct Mat3 {
  std::array<double, 9> a{};

  double& operator()(int i, int j) { return a[3 * i + j]; }
  double operator()(int i, int j) const { return a[3 * i + j]; }

  static Mat3 identity();
  static Mat3 diag(double d0, double d1, double d2);

  double trace() const { return a[0] + a[4] + a[8]; }
  double frobenius_sq() const;
  double max_abs() const;

  Mat3& operator+=(const Mat3& o);
  Mat3& operator-=(const Mat3& o);
  Mat3& operator*=(double s);
};

Mat3 operator+(Mat3 x, const Mat3& y);
Mat3 operator-(Mat3 x, const Mat3& y);
Mat3 operator*(double s, Mat3 x);
Mat3 operator*(const Mat3& x, const Mat3& y);

// Real symmetric traceless 3x3 matrix. Symmetry is exact in storage; the
// trace constraint is checked at construction.
class SymTraceless3 {
public:
  SymTraceless3() = default;

  // Throws ConstraintError if m is asymmetric or traceful beyond
  // 1e-14 * max|entry| (plus an absolute floor of 1e-300).
  static SymTraceless3 from_matrix(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double norm_sq() const { return m_.frobenius_sq(); }

private:
  explicit SymTraceless3(const Mat3& m) : m_(m) {}
  Mat3 m_{};
};

struct BulkParams {
  double t = 0.5;  // reduced temperature, > 0
  int k = 1;       // winding, != 0

  void validate() const;
};

// Bulk order parameter of the minimizing uniaxial state.
double s_plus(double t);

struct Frame {
  int k = 1;
  double phi = 0.0;
  std::array<SymTraceless3, 5> E;
};

Frame frame(int k, double phi);

// Ansatz matrices F1 = 2 n(x)n - I_2 (in-plane) and F2 = 3 e3(x)e3 - I.
Mat3 F1(int k, double phi);
Mat3 F2();

SymTraceless3 q_of_profile(double u, double v, int k, double phi);

struct QTensorCoords {
  std::array<double, 5> w{};
};

QTensorCoords coords_of(const SymTraceless3& V, const Frame& f);
QTensorCoords coords_of(const SymTraceless3& V, int k, double phi);
SymTraceless3 tensor_of(const QTensorCoords& w, const Frame& f);
SymTraceless3 tensor_of(const QTensorCoords& w, int k, double phi);

// Trace quantities entering the second variation.
struct TraceForms {
  double trQV = 0.0;
  double trF1V2 = 0.0;
  double trF2V2 = 0.0;
  double norm_sq = 0.0;  // |V|^2
};

// Closed forms in frame coordinates.
TraceForms trace_forms(double u, double v, const QTensorCoords& w, int k, double phi);
// Same quantities by explicit 3x3 products; used to cross-check the closed forms.
TraceForms trace_forms_matrix(double u, double v, const QTensorCoords& w, int k, double phi);

enum class Phase { isotropic, uniaxial, biaxial };

const char* to_string(Phase p);

// Q = s (n(x)n - I/3) + b (m(x)m - I/3), n.m = 0.
struct EigenParams {
  double s = 0.0;
  double b = 0.0;
  std::array<double, 3> n{};
  std::array<double, 3> m{};
  Phase phase = Phase::isotropic;
};

// Eigenvalues within 1e-10 (scaled by max(1, max|entry|)) are treated as equal.
// Biaxial states use n for the largest eigenvalue, m for the middle one, so
// that s >= b >= 0. A repeated pair gives b = 0 with n along the distinct
// eigenvector.
EigenParams eigen_params(const SymTraceless3& Q);

Mat3 reconstruct(const EigenParams& p);

}  // namespace defectlab
