#pragma once

#include <span>
#include <string>
#include <vector>

namespace defectlab {

enum class Grading { uniform, geometric };

const char* to_string(Grading g);
Grading grading_from_string(const std::string& s);

// Truncated radial domain [0, r_max] split into `intervals` cells.
struct MeshSpec {
  double r_max = 40.0;
  int intervals = 4096;
  Grading grading = Grading::uniform;
  double ratio = 1.0;  // cell growth factor for geometric grading, in (1, 1.1]

  void validate() const;
};

// Node positions plus the quadrature data shared by every discrete form:
// edge lengths h, edge midpoints, and dual-cell weights w_i = int r dr over
// [r_{i-1/2}, r_{i+1/2}] (exact for the area element, so w_0 = h^2/8 > 0).
struct RadialGrid {
  std::vector<double> r;
  std::vector<double> h;
  std::vector<double> rmid;
  std::vector<double> w;

  static RadialGrid build(const MeshSpec& spec);
  static RadialGrid from_nodes(std::vector<double> nodes);

  int nodes() const { return static_cast<int>(r.size()); }
  int intervals() const { return static_cast<int>(h.size()); }
  int index_at_or_above(double radius) const;
};

enum class Parity { none, even, odd };

// Fornberg finite-difference weights for derivatives 0..max_order at z.
std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> x,
                                                  int max_order);

// Fourth-order nodal derivatives (order 1 or 2) of samples on r. With a parity,
// stencils near r = 0 use mirrored ghost values f(-r) = +/- f(r); otherwise
// they become one-sided. One-sided stencils are used at the outer end.
std::vector<double> nodal_derivative(std::span<const double> r, std::span<const double> f,
                                     Parity parity, int order = 1);

}  // namespace defectlab
