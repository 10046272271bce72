#pragma once

#include <span>
#include <vector>

namespace defectlab {

// Symmetric banded matrix, lower band stored row by row.
class BandedSym {
public:
  BandedSym() = default;
  BandedSym(int n, int half_bandwidth);

  int size() const { return n_; }
  int half_bandwidth() const { return b_; }

  // Requires |i - j| <= half_bandwidth.
  double get(int i, int j) const;
  void set(int i, int j, double value);
  void add(int i, int j, double value);

  std::vector<double> multiply(std::span<const double> x) const;
  double quadratic_form(std::span<const double> x) const;
  double max_abs() const;

private:
  friend class BandedLDLT;
  double& slot(int i, int j);
  double slot(int i, int j) const;

  int n_ = 0;
  int b_ = 0;
  std::vector<double> data_;
};

// A = L D L^T without pivoting. Counts the inertia of A (Sylvester), which is
// how eigenvalue counts below a shift are certified.
class BandedLDLT {
public:
  // Returns false if a pivot falls below pivot_tol * max|A| in magnitude.
  bool factor(const BandedSym& a, double pivot_tol = 1e-14);

  int negative_pivots() const { return negatives_; }
  double min_abs_pivot() const { return min_abs_pivot_; }
  bool ok() const { return ok_; }

  void solve_in_place(std::span<double> x) const;

private:
  int n_ = 0;
  int b_ = 0;
  std::vector<double> l_;
  std::vector<double> d_;
  int negatives_ = 0;
  double min_abs_pivot_ = 0.0;
  bool ok_ = false;
};

}  // namespace defectlab
