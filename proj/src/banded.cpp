#include "defectlab/banded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "defectlab/error.hpp"

namespace defectlab {

BandedSym::BandedSym(int n, int half_bandwidth)
    : n_(n), b_(half_bandwidth), data_(static_cast<size_t>(n) * (half_bandwidth + 1), 0.0) {
  if (n < 0 || half_bandwidth < 0) throw PreconditionError("BandedSym: negative dimension");
}

double& BandedSym::slot(int i, int j) {
  if (i < j) std::swap(i, j);
  if (i - j > b_ || i >= n_ || j < 0) throw PreconditionError("BandedSym: entry outside band");
  return data_[static_cast<size_t>(i) * (b_ + 1) + (i - j)];
}

double BandedSym::slot(int i, int j) const {
  if (i < j) std::swap(i, j);
  if (i - j > b_) return 0.0;
  if (i >= n_ || j < 0) throw PreconditionError("BandedSym: index out of range");
  return data_[static_cast<size_t>(i) * (b_ + 1) + (i - j)];
}

double BandedSym::get(int i, int j) const { return slot(i, j); }
void BandedSym::set(int i, int j, double value) { slot(i, j) = value; }
void BandedSym::add(int i, int j, double value) { slot(i, j) += value; }

std::vector<double> BandedSym::multiply(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_) throw PreconditionError("BandedSym::multiply: size");
  std::vector<double> y(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    const double* row = &data_[static_cast<size_t>(i) * (b_ + 1)];
    y[i] += row[0] * x[i];
    for (int d = 1; d <= b_ && i - d >= 0; ++d) {
      y[i] += row[d] * x[i - d];
      y[i - d] += row[d] * x[i];
    }
  }
  return y;
}

double BandedSym::quadratic_form(std::span<const double> x) const {
  const auto y = multiply(x);
  double s = 0.0;
  for (int i = 0; i < n_; ++i) s += x[i] * y[i];
  return s;
}

double BandedSym::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool BandedLDLT::factor(const BandedSym& a, double pivot_tol) {
  n_ = a.n_;
  b_ = a.b_;
  const int w = b_ + 1;
  l_.assign(static_cast<size_t>(n_) * w, 0.0);
  d_.assign(n_, 0.0);
  negatives_ = 0;
  min_abs_pivot_ = std::numeric_limits<double>::infinity();
  ok_ = true;
  const double floor = pivot_tol * std::max(a.max_abs(), std::numeric_limits<double>::min());

  for (int i = 0; i < n_; ++i) {
    const int p0 = std::max(0, i - b_);
    double* li = &l_[static_cast<size_t>(i) * w];
    const double* ai = &a.data_[static_cast<size_t>(i) * w];
    for (int j = p0; j < i; ++j) {
      double s = ai[i - j];
      const double* lj = &l_[static_cast<size_t>(j) * w];
      const int q0 = std::max(p0, j - b_);
      for (int p = q0; p < j; ++p) s -= li[i - p] * d_[p] * lj[j - p];
      li[i - j] = s / d_[j];
    }
    double dii = ai[0];
    for (int p = p0; p < i; ++p) dii -= li[i - p] * li[i - p] * d_[p];
    if (!std::isfinite(dii)) throw NumericError("LDLT: non-finite pivot");
    d_[i] = dii;
    min_abs_pivot_ = std::min(min_abs_pivot_, std::abs(dii));
    if (std::abs(dii) <= floor) {
      ok_ = false;
      if (dii == 0.0) d_[i] = floor > 0.0 ? floor : std::numeric_limits<double>::min();
    }
    if (dii < 0.0) ++negatives_;
  }
  return ok_;
}

void BandedLDLT::solve_in_place(std::span<double> x) const {
  if (static_cast<int>(x.size()) != n_) throw PreconditionError("LDLT::solve: size");
  const int w = b_ + 1;
  for (int i = 0; i < n_; ++i) {
    const double* li = &l_[static_cast<size_t>(i) * w];
    double s = x[i];
    for (int d = 1; d <= b_ && i - d >= 0; ++d) s -= li[d] * x[i - d];
    x[i] = s;
  }
  for (int i = 0; i < n_; ++i) x[i] /= d_[i];
  for (int i = n_ - 1; i >= 0; --i) {
    double s = x[i];
    for (int d = 1; d <= b_ && i + d < n_; ++d)
      s -= l_[static_cast<size_t>(i + d) * w + d] * x[i + d];
    x[i] = s;
  }
}

}  // namespace defectlab
