#pragma once

// Uniform 1-D grids, P1 curves on S^2, trapezoidal quadrature, and the
// structured matrices (block tridiagonal, banded) that element assembly
// produces, together with their direct solvers.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bundle_newton/errors.hpp"
#include "bundle_newton/geometry.hpp"

namespace bundle_newton::fem1d {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using geometry::UnitVec3;
using geometry::Vec3;

/// Equidistant nodes t_i = i h, i = 0..N+1, on [0, T] with h = T/(N+1).
class Grid {
 public:
  Grid(double t_end, int n_interior);

  double t_end() const noexcept { return t_end_; }
  int n_interior() const noexcept { return n_interior_; }
  int n_nodes() const noexcept { return n_interior_ + 2; }
  int n_intervals() const noexcept { return n_interior_ + 1; }
  double h() const noexcept { return h_; }
  double node(int i) const { return i == n_interior_ + 1 ? t_end_ : i * h_; }

 private:
  double t_end_;
  int n_interior_;
  double h_;
};

/// P1 curve on S^2 given by its nodal values, boundary nodes included.
struct NodalCurve {
  Grid grid;
  std::vector<UnitVec3> points;

  /// Checks the node count against the grid.
  NodalCurve(Grid g, std::vector<UnitVec3> pts);

  const UnitVec3& operator[](int i) const { return points[static_cast<std::size_t>(i)]; }

  /// Euclidean (chordal) evaluation of the P1 interpolant.
  Vec3 evaluate(double t) const;
};

/// Nodewise samples of the constant-speed great-circle arc from a to b.
/// Throws DegenerateUpdate for antipodal or identical-direction ambiguity
/// only when a = -b exactly.
NodalCurve great_circle_curve(const Grid& grid, const UnitVec3& a, const UnitVec3& b);

/// Point at parameter s in [0,1] on the great-circle arc from a to b.
Vec3 great_circle_point(const UnitVec3& a, const UnitVec3& b, double s);

/// (b - a)/h.
Vec3 fd_slope(const Vec3& a, const Vec3& b, double h);

/// Trapezoidal rule on one interval: h (f_left + f_right)/2.
double trapezoid_accumulate(double f_left, double f_right, double h);

// --- Dense LU used for small pivot blocks ---------------------------------

/// LU factorization with partial pivoting for small dense matrices.
class DenseLU {
 public:
  /// Throws SingularSystem if the 1-norm condition number exceeds 1e14.
  explicit DenseLU(const MatrixXd& a);

  VectorXd solve(const VectorXd& rhs) const;
  MatrixXd solve(const MatrixXd& rhs) const;
  double condition_estimate() const noexcept { return condition_; }

 private:
  MatrixXd lu_;
  std::vector<Index> perm_;
  double condition_ = 1.0;
};

// --- Block tridiagonal ------------------------------------------------------

class BlockTriDiagLU;

/// Square matrix of n_blocks x n_blocks blocks of size m x m with
/// nonzero blocks only on the three central block diagonals.
/// lower(i) is block (i+1, i); upper(i) is block (i, i+1).
class BlockTriDiag {
 public:
  BlockTriDiag(int n_blocks, int block_dim);

  int n_blocks() const noexcept { return n_blocks_; }
  int block_dim() const noexcept { return block_dim_; }
  Index dim() const noexcept { return static_cast<Index>(n_blocks_) * block_dim_; }

  MatrixXd& diagonal(int i) { return diag_.at(static_cast<std::size_t>(i)); }
  MatrixXd& lower(int i) { return lower_.at(static_cast<std::size_t>(i)); }
  MatrixXd& upper(int i) { return upper_.at(static_cast<std::size_t>(i)); }
  const MatrixXd& diagonal(int i) const { return diag_.at(static_cast<std::size_t>(i)); }
  const MatrixXd& lower(int i) const { return lower_.at(static_cast<std::size_t>(i)); }
  const MatrixXd& upper(int i) const { return upper_.at(static_cast<std::size_t>(i)); }

  /// Block (row, col); throws DimensionMismatch outside the tridiagonal band.
  MatrixXd& block(int row, int col);

  VectorXd multiply(const VectorXd& x) const;
  MatrixXd to_dense() const;
  BlockTriDiag transpose() const;
  BlockTriDiag& operator*=(double s);

  BlockTriDiagLU factorize() const;

 private:
  int n_blocks_;
  int block_dim_;
  std::vector<MatrixXd> diag_;
  std::vector<MatrixXd> lower_;
  std::vector<MatrixXd> upper_;
};

/// Block Thomas factorization; pivoting happens only inside pivot blocks.
class BlockTriDiagLU {
 public:
  explicit BlockTriDiagLU(const BlockTriDiag& a);

  /// Solves A x = rhs.
  VectorXd solve(const VectorXd& rhs) const;
  Index dim() const noexcept { return static_cast<Index>(pivots_.size()) * block_dim_; }

 private:
  int block_dim_;
  std::vector<DenseLU> pivots_;   // LU of the Schur-complement pivot blocks
  std::vector<MatrixXd> lower_;   // original sub-diagonal blocks
  std::vector<MatrixXd> upper_;   // original super-diagonal blocks
};

/// Returns xi with A xi + b = 0.
VectorXd solve_block_tridiagonal(const BlockTriDiag& a, const VectorXd& b);

// --- Banded -----------------------------------------------------------------

class BandedLU;

/// Square matrix with entries only for -lower_bw <= col - row <= upper_bw.
class BandedMatrix {
 public:
  BandedMatrix(Index dim, int lower_bw, int upper_bw);

  Index dim() const noexcept { return dim_; }
  int lower_bw() const noexcept { return lower_bw_; }
  int upper_bw() const noexcept { return upper_bw_; }

  bool in_band(Index row, Index col) const noexcept {
    return col - row <= upper_bw_ && row - col <= lower_bw_;
  }
  /// Zero outside the band.
  double operator()(Index row, Index col) const;
  /// Throws DimensionMismatch outside the band.
  double& at(Index row, Index col);
  void add(Index row, Index col, double value) { at(row, col) += value; }

  VectorXd multiply(const VectorXd& x) const;
  MatrixXd to_dense() const;
  BandedMatrix& operator*=(double s);

  BandedLU factorize() const;

 private:
  Index dim_;
  int lower_bw_;
  int upper_bw_;
  std::vector<double> bands_;  // row-major, width lower_bw + upper_bw + 1
};

/// Banded LU with partial pivoting. Row interchanges widen the upper
/// bandwidth of U to upper_bw + lower_bw; storage is allocated for it.
class BandedLU {
 public:
  /// Throws SingularSystem on a zero pivot or a pivot spread above 1e14.
  explicit BandedLU(const BandedMatrix& a);

  /// Solves A x = rhs.
  VectorXd solve(const VectorXd& rhs) const;
  Index dim() const noexcept { return dim_; }

 private:
  double& entry(Index row, Index col) { return work_[static_cast<std::size_t>(row * width_ + (col - row + lower_bw_))]; }
  double entry(Index row, Index col) const { return work_[static_cast<std::size_t>(row * width_ + (col - row + lower_bw_))]; }

  Index dim_;
  int lower_bw_;
  int upper_bw_;  // of U after pivoting
  Index width_;
  std::vector<double> work_;
  std::vector<Index> pivot_rows_;
};

/// Returns xi with A xi + b = 0.
VectorXd solve_banded(const BandedMatrix& a, const VectorXd& b);

// --- Assembly -----------------------------------------------------------------

/// Local residual and Jacobian of one interval [t_i, t_{i+1}] for a nodal
/// problem with m dofs per node. Local ordering: node i first, then i+1.
struct NodalElement {
  VectorXd residual;  // 2m
  MatrixXd jacobian;  // 2m x 2m; empty when only the residual is wanted
};

/// Assembles per-interval contributions of a problem with `block_dim`
/// dofs per interior node. Boundary nodes 0 and N+1 are eliminated.
/// `kernel(i)` returns the NodalElement of interval i (i = 0..N).
template <class Kernel>
void assemble_nodal(const Grid& grid, int block_dim, Kernel&& kernel, VectorXd* residual,
                    BlockTriDiag* jacobian);

/// Local contribution with explicit global dof indices; -1 marks an
/// eliminated (boundary) dof.
struct IndexedElement {
  std::vector<Index> dofs;
  VectorXd residual;
  MatrixXd jacobian;
};

/// Scatters an indexed element into a global vector/banded matrix.
/// Either target may be null.
void scatter(const IndexedElement& element, VectorXd* residual, BandedMatrix* jacobian);

// --- template implementation ---------------------------------------------

template <class Kernel>
void assemble_nodal(const Grid& grid, int block_dim, Kernel&& kernel, VectorXd* residual,
                    BlockTriDiag* jacobian) {
  const int n = grid.n_interior();
  const int m = block_dim;
  if (residual) {
    residual->setZero(static_cast<Index>(n) * m);
  }
  if (jacobian && (jacobian->n_blocks() != n || jacobian->block_dim() != m)) {
    throw Error(ErrorKind::DimensionMismatch, "Jacobian layout does not match the grid");
  }
  for (int e = 0; e <= n; ++e) {
    const NodalElement local = kernel(e);
    if (local.residual.size() != 2 * m ||
        (jacobian && (local.jacobian.rows() != 2 * m || local.jacobian.cols() != 2 * m))) {
      throw Error(ErrorKind::DimensionMismatch, "element kernel returned wrong local size");
    }
    // Interior node index (0-based among unknowns) of local node a, or -1.
    auto unknown = [&](int a) { const int node = e + a; return (node >= 1 && node <= n) ? node - 1 : -1; };
    for (int a = 0; a < 2; ++a) {
      const int row = unknown(a);
      if (row < 0) {
        continue;
      }
      if (residual) {
        residual->segment(static_cast<Index>(row) * m, m) += local.residual.segment(a * m, m);
      }
      if (jacobian) {
        for (int b = 0; b < 2; ++b) {
          const int col = unknown(b);
          if (col >= 0) {
            jacobian->block(row, col) += local.jacobian.block(a * m, b * m, m, m);
          }
        }
      }
    }
  }
}

}  // namespace bundle_newton::fem1d
