#pragma once

// Fourier blocks of the second variation as banded symmetric-definite
// pencils (A, M), their smallest eigenpairs, and inertia counts.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "defectlab/banded.hpp"
#include "defectlab/forms.hpp"

namespace defectlab {

// Degrees of freedom of a block: at r = 0 the block's origin modes, on
// interior nodes one dof per field, none at r_max (Dirichlet).
struct DofMap {
  int nodes = 0;
  int fields = 0;
  std::vector<int> node_begin;  // dofs of node i: [node_begin[i], node_begin[i+1])
  std::vector<std::vector<double>> origin_modes;
  std::vector<int> dof_node;
  std::vector<double> r;  // node radii

  int size() const { return node_begin.empty() ? 0 : node_begin.back(); }
  int dofs_at(int i) const { return node_begin[i + 1] - node_begin[i]; }
  // Weight of local dof d of node i in field f.
  double coef(int i, int d, int f) const;
};

struct Pencil {
  BlockSpec spec;
  BandedSym A;
  std::vector<double> M;  // diagonal mass
  DofMap dofs;

  int size() const { return A.size(); }
  std::vector<RadialField> embed(std::span<const double> x) const;
  // Projection of block fields onto the dof space (drops the r_max node).
  std::vector<double> extract(std::span<const RadialField> fields) const;
  // sum_i M_i x_i y_i over dofs on nodes with r <= r_window.
  double m_dot(std::span<const double> x, std::span<const double> y,
               double r_window = std::numeric_limits<double>::infinity()) const;
};

Pencil assemble_block(const Profile& p, const BlockSpec& spec);

struct InertiaCount {
  int count = 0;
  double shift_used = 0.0;
  int retries = 0;
};

// Number of eigenvalues of A x = lambda M x below shift, by the inertia of
// A - shift M. A near-singular factorization is retried at a perturbed shift.
InertiaCount inertia_count(const BandedSym& A, std::span<const double> M, double shift);
int inertia_below(const Pencil& pencil, double shift);

struct EigenOptions {
  int count = 4;
  double tol = 1e-8;  // on ||A x - lambda M x||_2 with ||x||_M = 1
  std::uint64_t seed = 0;
  int max_iterations = 40;
};

struct EigenPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;  // M-orthonormal
  std::vector<double> residuals;
  int factorizations = 0;
  int shift_retries = 0;
  bool converged = false;
};

EigenPairs eig_smallest(const BandedSym& A, std::span<const double> M, const EigenOptions& opts);
EigenPairs eig_smallest(const Pencil& pencil, const EigenOptions& opts);

struct BlockResult {
  BlockSpec spec;
  int dimension = 0;
  EigenPairs eig;
  int inertia_below_shift = 0;
};

enum class Verdict { stable, unstable, indeterminate };

const char* to_string(Verdict v);

struct SweepOptions {
  int n_max = 8;
  int m_max = 8;
  int count = 4;
  double shift_scaled = -1e-6;  // shift = shift_scaled * s+^2
  std::uint64_t seed = 0;
  int threads = 0;  // 0: DEFECTLAB_THREADS or 1
  bool keep_vectors = true;
};

struct SpectralReport {
  BulkParams params;
  MeshSpec mesh;
  double s_plus = 0.0;
  double shift = 0.0;
  int n_max = 0;
  int m_max = 0;
  std::vector<BlockResult> blocks;  // A0_01, A0_2, A_1..A_nmax, B pairs 1..m_max
  bool monotone_in_n = false;
  bool monotone_in_m = false;
  int negative_total = 0;
  Verdict verdict = Verdict::indeterminate;

  const BlockResult* find(const std::string& block_name) const;
};

// Threads from DEFECTLAB_THREADS (default 1, at least 1).
int default_threads();

std::vector<BlockSpec> sweep_blocks(int k, int n_max, int m_max);

SpectralReport stability_sweep(const Profile& p, const SweepOptions& opts);

// Near-zero eigenvalues are those with lambda * r_max^2 below `scaled_threshold`:
// truncation turns the kernel into eigenvalues ~ j^2 / r_max^2 with j the first
// Bessel zero of the massless channel, while the next channels sit higher.
struct KernelMatchOptions {
  double scaled_threshold = 12.0;
  double window_fraction = 0.25;  // similarity measured on r <= fraction * r_max
};

struct KernelScore {
  int vector = 0;  // 0..4
  std::string block;
  double similarity = 0.0;  // cosine with the near-zero eigenspace on the window
  double angle = 0.0;       // acos(similarity)
};

struct KernelMatch {
  std::vector<std::pair<std::string, int>> near_zero;  // per block with count > 0
  int total = 0;
  bool expected_layout = false;  // one in A0_2, two in A_1, two in the (k, 0) pair
  std::vector<KernelScore> scores;
};

KernelMatch kernel_match(const Profile& p, const SpectralReport& report,
                         const KernelMatchOptions& opts = {});

// Block holding the (k, 0) pair of the B sector.
BlockSpec kernel_pair_block(int k);

struct KernelDecay {
  std::string block;
  int index = 0;
  double lambda_base = 0.0;
  double lambda_doubled = 0.0;
  double ratio = 0.0;  // |lambda_base / lambda_doubled|
};

// Smallest eigenvalues of the kernel-bearing blocks at r_max and 2 r_max
// (same spacing).
std::vector<KernelDecay> kernel_decay(const BulkParams& params, const MeshSpec& base,
                                      const EigenOptions& opts = {});

}  // namespace defectlab
