#include "defectlab/qtensor.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "defectlab/error.hpp"

namespace defectlab {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt6 = 1.0 / std::sqrt(6.0);
const double kSqrt2 = std::sqrt(2.0);
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt6 = std::sqrt(6.0);

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

Mat3 Mat3::identity() { return diag(1.0, 1.0, 1.0); }

Mat3 Mat3::diag(double d0, double d1, double d2) {
  Mat3 m;
  m(0, 0) = d0;
  m(1, 1) = d1;
  m(2, 2) = d2;
  return m;
}

double Mat3::frobenius_sq() const {
  double s = 0.0;
  for (double x : a) s += x * x;
  return s;
}

double Mat3::max_abs() const {
  double s = 0.0;
  for (double x : a) s = std::max(s, std::abs(x));
  return s;
}

Mat3& Mat3::operator+=(const Mat3& o) {
  for (int i = 0; i < 9; ++i) a[i] += o.a[i];
  return *this;
}

Mat3& Mat3::operator-=(const Mat3& o) {
  for (int i = 0; i < 9; ++i) a[i] -= o.a[i];
  return *this;
}

Mat3& Mat3::operator*=(double s) {
  for (double& x : a) x *= s;
  return *this;
}

Mat3 operator+(Mat3 x, const Mat3& y) { return x += y; }
Mat3 operator-(Mat3 x, const Mat3& y) { return x -= y; }
Mat3 operator*(double s, Mat3 x) { return x *= s; }

Mat3 operator*(const Mat3& x, const Mat3& y) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += x(i, l) * y(l, j);
      r(i, j) = s;
    }
  return r;
}

SymTraceless3 SymTraceless3::from_matrix(const Mat3& m) {
  const double scale = m.max_abs();
  const double tol = 1e-14 * scale + 1e-300;
  for (double x : m.a) require_finite(x, "tensor entry");
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol)
        throw ConstraintError("tensor is not symmetric");
  if (std::abs(m.trace()) > tol) throw ConstraintError("tensor is not traceless");
  Mat3 s = m;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      s(i, j) = avg;
      s(j, i) = avg;
    }
  return SymTraceless3(s);
}

void BulkParams::validate() const {
  if (!std::isfinite(t) || t <= 0.0) throw DomainError("reduced temperature t must be > 0");
  if (k == 0) throw DomainError("winding k must be nonzero");
}

double s_plus(double t) {
  if (!std::isfinite(t) || t <= 0.0) throw DomainError("s_plus requires finite t > 0");
  return (1.0 + std::sqrt(1.0 + 24.0 * t)) / 4.0;
}

Mat3 F1(int k, double phi) {
  const double c = std::cos(k * phi);
  const double s = std::sin(k * phi);
  Mat3 m;
  m(0, 0) = c;
  m(0, 1) = s;
  m(1, 0) = s;
  m(1, 1) = -c;
  return m;
}

Mat3 F2() { return Mat3::diag(-1.0, -1.0, 2.0); }

Frame frame(int k, double phi) {
  if (k == 0) throw DomainError("frame requires k != 0");
  require_finite(phi, "angle");
  const double c = std::cos(k * phi);
  const double s = std::sin(k * phi);
  Frame f;
  f.k = k;
  f.phi = phi;

  f.E[0] = SymTraceless3::from_matrix(kInvSqrt6 * F2());
  f.E[1] = SymTraceless3::from_matrix(kInvSqrt2 * F1(k, phi));

  Mat3 e2;
  e2(0, 0) = -s;
  e2(0, 1) = c;
  e2(1, 0) = c;
  e2(1, 1) = s;
  f.E[2] = SymTraceless3::from_matrix(kInvSqrt2 * e2);

  Mat3 e3;
  e3(0, 2) = kInvSqrt2;
  e3(2, 0) = kInvSqrt2;
  f.E[3] = SymTraceless3::from_matrix(e3);

  Mat3 e4;
  e4(1, 2) = kInvSqrt2;
  e4(2, 1) = kInvSqrt2;
  f.E[4] = SymTraceless3::from_matrix(e4);
  return f;
}

SymTraceless3 q_of_profile(double u, double v, int k, double phi) {
  require_finite(u, "u");
  require_finite(v, "v");
  require_finite(phi, "angle");
  return SymTraceless3::from_matrix(u * F1(k, phi) + v * F2());
}

QTensorCoords coords_of(const SymTraceless3& V, const Frame& f) {
  QTensorCoords w;
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int a = 0; a < 9; ++a) s += V.matrix().a[a] * f.E[i].matrix().a[a];
    w.w[i] = s;
  }
  return w;
}

QTensorCoords coords_of(const SymTraceless3& V, int k, double phi) {
  return coords_of(V, frame(k, phi));
}

SymTraceless3 tensor_of(const QTensorCoords& w, const Frame& f) {
  Mat3 m;
  for (int i = 0; i < 5; ++i) m += w.w[i] * f.E[i].matrix();
  return SymTraceless3::from_matrix(m);
}

SymTraceless3 tensor_of(const QTensorCoords& w, int k, double phi) {
  return tensor_of(w, frame(k, phi));
}

TraceForms trace_forms(double u, double v, const QTensorCoords& c, int k, double phi) {
  const auto& w = c.w;
  const double ck = std::cos(k * phi);
  const double sk = std::sin(k * phi);
  TraceForms r;
  r.trQV = kSqrt2 * u * w[1] + kSqrt6 * v * w[0];
  r.trF1V2 = 0.5 * ck * (w[3] * w[3] - w[4] * w[4]) - 2.0 / kSqrt3 * w[0] * w[1] +
             sk * w[3] * w[4];
  r.trF2V2 = w[0] * w[0] - w[1] * w[1] - w[2] * w[2] + 0.5 * w[3] * w[3] + 0.5 * w[4] * w[4];
  r.norm_sq = 0.0;
  for (double x : w) r.norm_sq += x * x;
  return r;
}

TraceForms trace_forms_matrix(double u, double v, const QTensorCoords& w, int k, double phi) {
  const Frame f = frame(k, phi);
  const Mat3 V = tensor_of(w, f).matrix();
  const Mat3 V2 = V * V;
  const Mat3 f1 = F1(k, phi);
  const Mat3 f2 = F2();
  const Mat3 Q = u * f1 + v * f2;
  TraceForms r;
  r.trQV = (Q * V).trace();
  r.trF1V2 = (f1 * V2).trace();
  r.trF2V2 = (f2 * V2).trace();
  r.norm_sq = V2.trace();
  return r;
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::isotropic:
      return "isotropic";
    case Phase::uniaxial:
      return "uniaxial";
    case Phase::biaxial:
      return "biaxial";
  }
  return "unknown";
}

EigenParams eigen_params(const SymTraceless3& Q) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = Q(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  // Ascending order from Eigen.
  const Eigen::Vector3d lam = es.eigenvalues();
  const Eigen::Matrix3d vec = es.eigenvectors();
  const double tol = 1e-10 * std::max(1.0, Q.matrix().max_abs());

  auto column = [&](int c) {
    return std::array<double, 3>{vec(0, c), vec(1, c), vec(2, c)};
  };

  EigenParams p;
  const bool low_tie = std::abs(lam(1) - lam(0)) <= tol;
  const bool high_tie = std::abs(lam(2) - lam(1)) <= tol;
  if (low_tie && high_tie) {
    p.phase = Phase::isotropic;
    p.n = column(2);
    p.m = column(1);
    return p;
  }
  if (low_tie || high_tie) {
    // Distinct eigenvalue carries the director.
    const int d = low_tie ? 2 : 0;
    const int o = low_tie ? 0 : 2;
    const double mu = 0.5 * (lam(1) + lam(o));
    p.phase = Phase::uniaxial;
    p.s = lam(d) - mu;
    p.b = 0.0;
    p.n = column(d);
    p.m = column(1);
    return p;
  }
  p.phase = Phase::biaxial;
  p.s = lam(2) - lam(0);
  p.b = lam(1) - lam(0);
  p.n = column(2);
  p.m = column(1);
  return p;
}

Mat3 reconstruct(const EigenParams& p) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = p.s * p.n[i] * p.n[j] + p.b * p.m[i] * p.m[j];
  const double shift = (p.s + p.b) / 3.0;
  for (int i = 0; i < 3; ++i) r(i, i) -= shift;
  return r;
}

}  // namespace defectlab
