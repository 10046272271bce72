#include "defectlab/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <thread>

#include "defectlab/error.hpp"

namespace defectlab {

double DofMap::coef(int i, int d, int f) const {
  if (i == 0) return origin_modes[d][f];
  return d == f ? 1.0 : 0.0;
}

std::vector<RadialField> Pencil::embed(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != size()) throw PreconditionError("embed: vector size");
  std::vector<RadialField> f(dofs.fields, RadialField(dofs.nodes, 0.0));
  for (int i = 0; i < dofs.nodes; ++i)
    for (int d = 0; d < dofs.dofs_at(i); ++d) {
      const double xd = x[dofs.node_begin[i] + d];
      for (int q = 0; q < dofs.fields; ++q) f[q][i] += dofs.coef(i, d, q) * xd;
    }
  return f;
}

std::vector<double> Pencil::extract(std::span<const RadialField> fields) const {
  if (static_cast<int>(fields.size()) != dofs.fields) throw PreconditionError("extract: field count");
  for (const auto& f : fields)
    if (static_cast<int>(f.size()) != dofs.nodes) throw PreconditionError("extract: field length");
  std::vector<double> x(size(), 0.0);
  for (int i = 0; i < dofs.nodes; ++i)
    for (int d = 0; d < dofs.dofs_at(i); ++d) {
      double s = 0.0;
      for (int q = 0; q < dofs.fields; ++q) s += dofs.coef(i, d, q) * fields[q][i];
      x[dofs.node_begin[i] + d] = s;
    }
  return x;
}

double Pencil::m_dot(std::span<const double> x, std::span<const double> y, double r_window) const {
  double s = 0.0;
  for (int d = 0; d < size(); ++d)
    if (dofs.r.empty() || dofs.r[dofs.dof_node[d]] <= r_window) s += M[d] * x[d] * y[d];
  return s;
}

namespace {

// Symmetric potential matrix of the block integrand at node i (row-major F x F).
std::vector<double> potential_matrix(const Profile& p, const BlockSpec& s, int i) {
  const LocalCoefficients c = local_coefficients(p, i);
  const int F = s.field_count();
  std::vector<double> P(static_cast<size_t>(F) * F, 0.0);
  auto set = [&](int a, int b, double v) {
    P[static_cast<size_t>(a) * F + b] = v;
    P[static_cast<size_t>(b) * F + a] = v;
  };
  const double k = s.k;
  const double ir2 = c.inv_r2;
  switch (s.sector) {
    case Sector::A0_01:
      set(0, 0, c.p0);
      set(1, 1, c.p1 + k * k * ir2);
      set(0, 1, 0.5 * c.c01);
      break;
    case Sector::A0_2:
      set(0, 0, c.p2 + k * k * ir2);
      break;
    case Sector::A_n: {
      const double n = s.n;
      const double cf = n * n * ir2;
      set(0, 0, c.p0 + cf);
      set(1, 1, c.p0 + cf);
      set(2, 2, c.p1 + k * k * ir2 + cf);
      set(3, 3, c.p1 + k * k * ir2 + cf);
      set(4, 4, c.p2 + k * k * ir2 + cf);
      set(5, 5, c.p2 + k * k * ir2 + cf);
      set(0, 2, 0.5 * c.c01);
      set(1, 3, 0.5 * c.c01);
      set(2, 5, 2.0 * k * n * ir2);
      set(4, 3, -2.0 * k * n * ir2);
      break;
    }
    case Sector::B_pair: {
      const double m2 = static_cast<double>(s.m) * s.m * ir2;
      const double l2 = static_cast<double>(s.l) * s.l * ir2;
      if (s.self_pair()) {
        set(0, 0, m2 + c.pb - c.u);
        set(1, 1, m2 + c.pb + c.u);
      } else {
        set(0, 0, m2 + c.pb);
        set(1, 1, l2 + c.pb);
        set(2, 2, m2 + c.pb);
        set(3, 3, l2 + c.pb);
        set(0, 1, -c.u);
        set(2, 3, c.u);
      }
      break;
    }
  }
  return P;
}

}  // namespace

Pencil assemble_block(const Profile& p, const BlockSpec& spec) {
  spec.validate();
  if (spec.k != p.params.k) throw PreconditionError("block winding differs from the profile's");
  const RadialGrid& g = p.grid;
  const int nodes = p.nodes();
  const int F = spec.field_count();

  Pencil out;
  out.spec = spec;
  DofMap& dm = out.dofs;
  dm.nodes = nodes;
  dm.fields = F;
  dm.origin_modes = spec.origin_modes();
  dm.r = g.r;
  dm.node_begin.assign(nodes + 1, 0);
  for (int i = 0; i < nodes; ++i) {
    const int cnt = i == 0 ? static_cast<int>(dm.origin_modes.size()) : (i == nodes - 1 ? 0 : F);
    dm.node_begin[i + 1] = dm.node_begin[i] + cnt;
  }
  const int n = dm.size();
  dm.dof_node.resize(n);
  for (int i = 0; i < nodes; ++i)
    for (int d = dm.node_begin[i]; d < dm.node_begin[i + 1]; ++d) dm.dof_node[d] = i;

  out.A = BandedSym(n, std::max(1, 2 * F - 1));
  out.M.assign(n, 0.0);

  // Stiffness: rmid/h sum_f (x_f(e+1) - x_f(e))^2.
  std::vector<std::pair<int, double>> gvec;
  for (int e = 0; e + 1 < nodes; ++e) {
    const double c = g.rmid[e] / g.h[e];
    for (int f = 0; f < F; ++f) {
      gvec.clear();
      for (int d = 0; d < dm.dofs_at(e); ++d) {
        const double a = dm.coef(e, d, f);
        if (a != 0.0) gvec.emplace_back(dm.node_begin[e] + d, -a);
      }
      for (int d = 0; d < dm.dofs_at(e + 1); ++d) {
        const double a = dm.coef(e + 1, d, f);
        if (a != 0.0) gvec.emplace_back(dm.node_begin[e + 1] + d, a);
      }
      for (size_t x = 0; x < gvec.size(); ++x)
        for (size_t y = 0; y <= x; ++y) {
          const double v = c * gvec[x].second * gvec[y].second;
          if (gvec[x].first == gvec[y].first)
            out.A.add(gvec[x].first, gvec[x].first, v);
          else if (gvec[x].first > gvec[y].first)
            out.A.add(gvec[x].first, gvec[y].first, v);
          else
            out.A.add(gvec[y].first, gvec[x].first, v);
        }
    }
  }

  // Nodal potential and lumped mass.
  for (int i = 0; i < nodes; ++i) {
    const int nd = dm.dofs_at(i);
    if (nd == 0) continue;
    const std::vector<double> P = potential_matrix(p, spec, i);
    const double w = g.w[i];
    for (int a = 0; a < nd; ++a) {
      double mass = 0.0;
      for (int f = 0; f < F; ++f) mass += dm.coef(i, a, f) * dm.coef(i, a, f);
      out.M[dm.node_begin[i] + a] = w * mass;
      for (int b = 0; b <= a; ++b) {
        double s = 0.0;
        for (int f = 0; f < F; ++f) {
          const double ca = dm.coef(i, a, f);
          if (ca == 0.0) continue;
          for (int h = 0; h < F; ++h) s += ca * P[static_cast<size_t>(f) * F + h] * dm.coef(i, b, h);
        }
        out.A.add(dm.node_begin[i] + a, dm.node_begin[i] + b, w * s);
      }
    }
  }
  for (double m : out.M)
    if (!(m > 0.0)) throw NumericError("assemble_block: non-positive mass entry");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

BandedSym shifted(const BandedSym& A, std::span<const double> M, double sigma) {
  BandedSym S = A;
  for (int i = 0; i < S.size(); ++i) S.add(i, i, -sigma * M[i]);
  return S;
}

// Factor A - sigma M, nudging sigma away from an eigenvalue when a pivot
// collapses. Returns the shift actually used.
double factor_shifted(const BandedSym& A, std::span<const double> M, double sigma,
                      BandedLDLT& ldlt, int& retries) {
  double scale = 0.0;
  for (int i = 0; i < A.size(); ++i) scale = std::max(scale, std::abs(A.get(i, i) / M[i]));
  scale = std::max(scale, 1.0);
  double s = sigma;
  for (int attempt = 0; attempt < 8; ++attempt) {
    if (ldlt.factor(shifted(A, M, s))) return s;
    ++retries;
    s = sigma + (attempt % 2 == 0 ? 1.0 : -1.0) * 1e-12 * scale * std::pow(4.0, attempt);
  }
  throw NumericError("factorization of A - shift M stays singular under shift perturbation");
}

void check_pencil(const BandedSym& A, std::span<const double> M) {
  if (static_cast<int>(M.size()) != A.size()) throw PreconditionError("pencil: size mismatch");
  for (double m : M)
    if (!(m > 0.0) || !std::isfinite(m)) throw PreconditionError("pencil: mass must be positive");
}

}  // namespace

InertiaCount inertia_count(const BandedSym& A, std::span<const double> M, double shift) {
  check_pencil(A, M);
  if (!std::isfinite(shift)) throw DomainError("shift must be finite");
  BandedLDLT ldlt;
  InertiaCount out;
  out.shift_used = factor_shifted(A, M, shift, ldlt, out.retries);
  out.count = ldlt.negative_pivots();
  return out;
}

int inertia_below(const Pencil& pencil, double shift) {
  return inertia_count(pencil.A, pencil.M, shift).count;
}

namespace {

using Vec = std::vector<double>;

double mdot(std::span<const double> M, const Vec& x, const Vec& y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += M[i] * x[i] * y[i];
  return s;
}

// Modified Gram-Schmidt in the M inner product; drops near-dependent vectors.
void m_orthonormalize(std::span<const double> M, std::vector<Vec>& X) {
  std::vector<Vec> out;
  for (auto& x : X) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : out) {
        const double c = mdot(M, q, x);
        for (size_t i = 0; i < x.size(); ++i) x[i] -= c * q[i];
      }
    const double nrm = std::sqrt(mdot(M, x, x));
    if (nrm > 1e-300) {
      for (double& v : x) v /= nrm;
      out.push_back(std::move(x));
    }
  }
  X = std::move(out);
}

}  // namespace

EigenPairs eig_smallest(const BandedSym& A, std::span<const double> M, const EigenOptions& opts) {
  check_pencil(A, M);
  const int n = A.size();
  if (opts.count < 1 || opts.count > 10) throw DomainError("eigenvalue count must be in [1, 10]");
  if (!(opts.tol > 0.0)) throw DomainError("eigen tolerance must be > 0");
  const int want = std::min(opts.count, n);
  EigenPairs out;

  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(A.get(i, i)) / M[i]);
  scale = std::max(scale, 1e-300);

  // Eigenvalue counts at sampled shifts.
  std::map<double, int> counts;
  auto count = [&](double s) {
    auto it = counts.find(s);
    if (it != counts.end()) return it->second;
    BandedLDLT ldlt;
    const double used = factor_shifted(A, M, s, ldlt, out.shift_retries);
    ++out.factorizations;
    counts[used] = ldlt.negative_pivots();
    if (used != s) counts[s] = ldlt.negative_pivots();
    return ldlt.negative_pivots();
  };

  const int target = std::min(want + 1, n);  // one extra to measure the gap above
  double lo = -1.0;
  while (count(lo) > 0) {
    lo *= 4.0;
    if (lo < -1e300) throw NumericError("eig_smallest: spectrum unbounded below");
  }
  double hi = 1.0;
  while (count(hi) < target) {
    hi *= 4.0;
    if (hi > 1e300) throw NumericError("eig_smallest: cannot bracket eigenvalues");
  }

  // Bisection for lambda_j, j = 1..target.
  std::vector<double> lam(target);
  for (int j = 1; j <= target; ++j) {
    double a = lo, b = hi;
    for (const auto& [s, c] : counts) {
      if (c < j) a = std::max(a, s);
      if (c >= j) b = std::min(b, s);
    }
    while (b - a > 1e-11 * std::max(std::abs(a), std::abs(b)) + 1e-14 * scale) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (count(mid) < j)
        a = mid;
      else
        b = mid;
    }
    lam[j - 1] = 0.5 * (a + b);
  }

  // Clusters of (numerically) equal eigenvalues among the wanted ones.
  std::vector<std::pair<int, int>> clusters;  // [begin, end)
  for (int j = 0; j < want;) {
    int e = j + 1;
    while (e < want && lam[e] - lam[j] <= 1e-7 * std::max(std::abs(lam[j]), 1e-9 * scale)) ++e;
    clusters.emplace_back(j, e);
    j = e;
  }

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> X;
  for (size_t ci = 0; ci < clusters.size(); ++ci) {
    const auto [b, e] = clusters[ci];
    const double below = b > 0 ? lam[b] - lam[b - 1] : std::abs(lam[b]) + scale;
    const double above = e < target ? lam[e] - lam[e - 1] : std::abs(lam[e - 1]) + scale;
    const double gap = std::max(std::min(below, above), 1e-14 * scale);
    const double sigma = lam[b] - 1e-2 * gap;
    BandedLDLT ldlt;
    factor_shifted(A, M, sigma, ldlt, out.shift_retries);
    ++out.factorizations;
    std::vector<Vec> Y(e - b, Vec(n));
    for (auto& y : Y)
      for (double& v : y) v = normal(rng);
    for (int it = 0; it < 4; ++it) {
      for (auto& y : Y) {
        for (int i = 0; i < n; ++i) y[i] *= M[i];
        ldlt.solve_in_place(y);
      }
      m_orthonormalize(M, Y);
    }
    for (auto& y : Y) X.push_back(std::move(y));
  }

  auto rayleigh_ritz = [&]() {
    m_orthonormalize(M, X);
    const int c = static_cast<int>(X.size());
    Eigen::MatrixXd Ah(c, c), Mh(c, c);
    std::vector<Vec> AX(c);
    for (int a = 0; a < c; ++a) AX[a] = A.multiply(X[a]);
    for (int a = 0; a < c; ++a)
      for (int b = 0; b < c; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += X[a][i] * AX[b][i];
        Ah(a, b) = s;
        Mh(a, b) = mdot(M, X[a], X[b]);
      }
    Ah = 0.5 * (Ah + Ah.transpose());
    Mh = 0.5 * (Mh + Mh.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ah, Mh);
    if (ges.info() != Eigen::Success) throw NumericError("Rayleigh-Ritz eigensolve failed");
    std::vector<Vec> Z(c, Vec(n, 0.0));
    for (int a = 0; a < c; ++a)
      for (int b = 0; b < c; ++b) {
        const double w = ges.eigenvectors()(b, a);
        for (int i = 0; i < n; ++i) Z[a][i] += w * X[b][i];
      }
    X = std::move(Z);
    m_orthonormalize(M, X);
    out.values.assign(c, 0.0);
    out.residuals.assign(c, 0.0);
    for (int a = 0; a < c; ++a) {
      const Vec ax = A.multiply(X[a]);
      double num = 0.0;
      for (int i = 0; i < n; ++i) num += X[a][i] * ax[i];
      out.values[a] = num;
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) r2 += (ax[i] - num * M[i] * X[a][i]) * (ax[i] - num * M[i] * X[a][i]);
      out.residuals[a] = std::sqrt(r2);
    }
  };
  rayleigh_ritz();

  // Extra shift-invert sweeps per cluster if a residual is still large.
  for (int sweep = 0; sweep < opts.max_iterations; ++sweep) {
    const double worst = *std::max_element(out.residuals.begin(), out.residuals.end());
    if (worst <= opts.tol) break;
    std::vector<Vec> Y;
    for (const auto& [b, e] : clusters) {
      const double sigma = lam[b] - 1e-3 * (std::abs(lam[b]) + 1e-9 * scale);
      BandedLDLT ldlt;
      factor_shifted(A, M, sigma, ldlt, out.shift_retries);
      ++out.factorizations;
      for (int j = b; j < e && j < static_cast<int>(X.size()); ++j) {
        Vec y = X[j];
        for (int i = 0; i < n; ++i) y[i] *= M[i];
        ldlt.solve_in_place(y);
        Y.push_back(std::move(y));
      }
    }
    X = std::move(Y);
    rayleigh_ritz();
  }

  // Recomputed Rayleigh quotients of a degenerate cluster can swap by an ulp.
  std::vector<int> order(out.values.size());
  for (size_t a = 0; a < order.size(); ++a) order[a] = static_cast<int>(a);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return out.values[a] < out.values[b]; });
  {
    std::vector<double> vals, res;
    std::vector<Vec> vecs;
    for (int a : order) {
      vals.push_back(out.values[a]);
      res.push_back(out.residuals[a]);
      vecs.push_back(std::move(X[a]));
    }
    out.values = std::move(vals);
    out.residuals = std::move(res);
    X = std::move(vecs);
  }

  // Deterministic sign: largest-magnitude component positive.
  for (auto& x : X) {
    size_t arg = 0;
    for (size_t i = 1; i < x.size(); ++i)
      if (std::abs(x[i]) > std::abs(x[arg]) * (1.0 + 1e-12)) arg = i;
    if (x[arg] < 0.0)
      for (double& v : x) v = -v;
  }
  out.vectors = std::move(X);
  out.converged = static_cast<int>(out.values.size()) == want &&
                  *std::max_element(out.residuals.begin(), out.residuals.end()) <= opts.tol;
  return out;
}

EigenPairs eig_smallest(const Pencil& pencil, const EigenOptions& opts) {
  return eig_smallest(pencil.A, pencil.M, opts);
}

// ---------------------------------------------------------------------------

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

const BlockResult* SpectralReport::find(const std::string& block_name) const {
  for (const auto& b : blocks)
    if (b.spec.name() == block_name) return &b;
  return nullptr;
}

int default_threads() {
  if (const char* env = std::getenv("DEFECTLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 256) return static_cast<int>(v);
  }
  return 1;
}

std::vector<BlockSpec> sweep_blocks(int k, int n_max, int m_max) {
  std::vector<BlockSpec> specs;
  specs.push_back(BlockSpec::a0_01(k));
  specs.push_back(BlockSpec::a0_2(k));
  for (int n = 1; n <= n_max; ++n) specs.push_back(BlockSpec::a_n(k, n));
  for (int j = 1; j <= m_max; ++j) specs.push_back(BlockSpec::b_pair(k, j));
  return specs;
}

SpectralReport stability_sweep(const Profile& p, const SweepOptions& opts) {
  if (opts.n_max < 1 || opts.m_max < 1) throw DomainError("n_max and m_max must be >= 1");
  SpectralReport rep;
  rep.params = p.params;
  rep.mesh = p.mesh;
  rep.s_plus = p.s_plus;
  rep.shift = opts.shift_scaled * p.s_plus * p.s_plus;
  rep.n_max = opts.n_max;
  rep.m_max = opts.m_max;

  const std::vector<BlockSpec> specs = sweep_blocks(p.params.k, opts.n_max, opts.m_max);
  rep.blocks.resize(specs.size());
  auto run = [&](size_t idx) {
    const Pencil pen = assemble_block(p, specs[idx]);
    BlockResult br;
    br.spec = specs[idx];
    br.dimension = pen.size();
    EigenOptions eo;
    eo.count = opts.count;
    eo.seed = opts.seed + idx;
    br.eig = eig_smallest(pen, eo);
    if (!opts.keep_vectors) br.eig.vectors.clear();
    br.inertia_below_shift = inertia_below(pen, rep.shift);
    rep.blocks[idx] = std::move(br);
  };

  const int threads = std::max(1, opts.threads > 0 ? opts.threads : default_threads());
  if (threads == 1) {
    for (size_t i = 0; i < specs.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < specs.size(); i += threads) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const double slack = 1e-9 * p.s_plus * p.s_plus;
  auto lmin = [&](const BlockResult& b) { return b.eig.values.front(); };
  rep.monotone_in_n = true;
  for (int n = 2; n <= opts.n_max; ++n)
    if (lmin(rep.blocks[1 + n]) < lmin(rep.blocks[n]) - slack) rep.monotone_in_n = false;
  rep.monotone_in_m = true;
  const size_t b0 = 2 + opts.n_max;
  for (int j = 2; j <= opts.m_max; ++j)
    if (lmin(rep.blocks[b0 + j - 1]) < lmin(rep.blocks[b0 + j - 2]) - slack) rep.monotone_in_m = false;

  bool all_converged = true;
  rep.negative_total = 0;
  for (const auto& b : rep.blocks) {
    rep.negative_total += b.inertia_below_shift;
    all_converged = all_converged && b.eig.converged;
  }
  if (rep.negative_total > 0)
    rep.verdict = Verdict::unstable;
  else
    rep.verdict = all_converged ? Verdict::stable : Verdict::indeterminate;
  return rep;
}

// ---------------------------------------------------------------------------

BlockSpec kernel_pair_block(int k) {
  // (k, 0) for k > 0, (0, k) for k < 0.
  for (int j = 1;; ++j) {
    const BlockSpec s = BlockSpec::b_pair(k, j);
    if (s.l == 0 || s.m == 0) return s;
  }
}

namespace {

// Cosine between x and the span of `basis` in the windowed M inner product.
double subspace_similarity(const Pencil& pen, const std::vector<double>& x,
                           const std::vector<std::vector<double>>& basis, double window) {
  std::vector<std::vector<double>> Q = basis;
  // Gram-Schmidt in the windowed product.
  std::vector<std::vector<double>> on;
  for (auto& q : Q) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& o : on) {
        const double c = pen.m_dot(o, q, window);
        for (size_t i = 0; i < q.size(); ++i) q[i] -= c * o[i];
      }
    const double nrm = std::sqrt(pen.m_dot(q, q, window));
    if (nrm > 1e-300) {
      for (double& v : q) v /= nrm;
      on.push_back(q);
    }
  }
  const double xx = pen.m_dot(x, x, window);
  if (!(xx > 0.0)) return 0.0;
  double proj = 0.0;
  for (const auto& o : on) proj += std::pow(pen.m_dot(o, x, window), 2);
  return std::min(1.0, std::sqrt(proj / xx));
}

}  // namespace

KernelMatch kernel_match(const Profile& p, const SpectralReport& report,
                         const KernelMatchOptions& opts) {
  const int k = p.params.k;
  const double r_max = p.r().back();
  const double cut = opts.scaled_threshold / (r_max * r_max);
  const double window = opts.window_fraction * r_max;

  KernelMatch km;
  auto near_zero = [&](const BlockResult& b) {
    int c = 0;
    for (double l : b.eig.values)
      if (l < cut) ++c;
    return c;
  };
  for (const auto& b : report.blocks) {
    const int c = near_zero(b);
    if (c > 0) km.near_zero.emplace_back(b.spec.name(), c);
    km.total += c;
  }

  const std::string a02 = BlockSpec::a0_2(k).name();
  const std::string a1 = BlockSpec::a_n(k, 1).name();
  const std::string bk = kernel_pair_block(k).name();
  km.expected_layout = km.total == 5 && km.near_zero.size() == 3;
  for (const auto& [name, c] : km.near_zero) {
    const int expect = name == a02 ? 1 : (name == a1 || name == bk) ? 2 : 0;
    if (c != expect) km.expected_layout = false;
  }

  const KernelVectors kv = kernel_vectors(p, r_max);
  const std::string blocks_of[5] = {a02, a1, a1, bk, bk};
  for (int q = 0; q < 5; ++q) {
    const BlockResult* br = report.find(blocks_of[q]);
    if (br == nullptr) throw PreconditionError("kernel_match: sweep lacks block " + blocks_of[q]);
    if (br->eig.vectors.empty())
      throw PreconditionError("kernel_match: eigenvectors of " + blocks_of[q] + " were not kept");
    const Pencil pen = assemble_block(p, br->spec);
    const std::vector<RadialField> fields = block_fields(p, kv.raw[q], br->spec);
    const std::vector<double> x = pen.extract(fields);
    std::vector<std::vector<double>> basis;
    for (size_t j = 0; j < br->eig.values.size(); ++j)
      if (br->eig.values[j] < cut) basis.push_back(br->eig.vectors[j]);
    KernelScore s;
    s.vector = q;
    s.block = blocks_of[q];
    s.similarity = basis.empty() ? 0.0 : subspace_similarity(pen, x, basis, window);
    s.angle = std::acos(std::clamp(s.similarity, 0.0, 1.0));
    km.scores.push_back(s);
  }
  return km;
}

std::vector<KernelDecay> kernel_decay(const BulkParams& params, const MeshSpec& base,
                                      const EigenOptions& opts) {
  MeshSpec doubled = base;
  doubled.r_max = 2.0 * base.r_max;
  doubled.intervals = 2 * base.intervals;
  const Profile p1 = solve_profile(params, base);
  const Profile p2 = solve_profile(params, doubled);
  const int k = params.k;
  const BlockSpec specs[3] = {BlockSpec::a0_2(k), BlockSpec::a_n(k, 1), kernel_pair_block(k)};
  const int counts[3] = {1, 2, 2};
  std::vector<KernelDecay> out;
  for (int b = 0; b < 3; ++b) {
    EigenOptions eo = opts;
    eo.count = counts[b];
    const EigenPairs e1 = eig_smallest(assemble_block(p1, specs[b]), eo);
    const EigenPairs e2 = eig_smallest(assemble_block(p2, specs[b]), eo);
    for (int j = 0; j < counts[b]; ++j) {
      KernelDecay d;
      d.block = specs[b].name();
      d.index = j;
      d.lambda_base = e1.values[j];
      d.lambda_doubled = e2.values[j];
      d.ratio = std::abs(d.lambda_base / d.lambda_doubled);
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace defectlab
