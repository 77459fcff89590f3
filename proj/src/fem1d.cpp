#include "bundle_newton/fem1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace bundle_newton::fem1d {

namespace {

constexpr double kMaxCondition = 1e14;

double norm1(const MatrixXd& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

Grid::Grid(double t_end, int n_interior) : t_end_(t_end), n_interior_(n_interior), h_(0.0) {
  if (!(t_end > 0.0) || n_interior < 1) {
    throw Error(ErrorKind::InvalidArgument, "grid needs T > 0 and N >= 1");
  }
  h_ = t_end / (n_interior + 1);
}

NodalCurve::NodalCurve(Grid g, std::vector<UnitVec3> pts) : grid(g), points(std::move(pts)) {
  if (static_cast<int>(points.size()) != grid.n_nodes()) {
    throw Error(ErrorKind::DimensionMismatch, "curve node count does not match grid");
  }
}

Vec3 NodalCurve::evaluate(double t) const {
  const double h = grid.h();
  int i = static_cast<int>(std::floor(t / h));
  i = std::clamp(i, 0, grid.n_intervals() - 1);
  const double s = (t - grid.node(i)) / h;
  return (1.0 - s) * points[static_cast<std::size_t>(i)].coords() +
         s * points[static_cast<std::size_t>(i + 1)].coords();
}

Vec3 great_circle_point(const UnitVec3& a, const UnitVec3& b, double s) {
  const Vec3& p = a.coords();
  const Vec3& q = b.coords();
  const double sin_angle = p.cross(q).norm();
  const double angle = std::atan2(sin_angle, p.dot(q));
  if (sin_angle < 1e-14) {
    if (p.dot(q) < 0.0) {
      throw Error(ErrorKind::DegenerateUpdate, "great circle through antipodal points is not unique");
    }
    return ((1.0 - s) * p + s * q).normalized();
  }
  return (std::sin((1.0 - s) * angle) * p + std::sin(s * angle) * q) / std::sin(angle);
}

NodalCurve great_circle_curve(const Grid& grid, const UnitVec3& a, const UnitVec3& b) {
  std::vector<UnitVec3> pts;
  pts.reserve(static_cast<std::size_t>(grid.n_nodes()));
  pts.push_back(a);
  for (int i = 1; i <= grid.n_interior(); ++i) {
    pts.push_back(UnitVec3::normalized(great_circle_point(a, b, grid.node(i) / grid.t_end())));
  }
  pts.push_back(b);
  return NodalCurve(grid, std::move(pts));
}

Vec3 fd_slope(const Vec3& a, const Vec3& b, double h) { return (b - a) / h; }

double trapezoid_accumulate(double f_left, double f_right, double h) {
  return 0.5 * h * (f_left + f_right);
}

// --- DenseLU ----------------------------------------------------------------

DenseLU::DenseLU(const MatrixXd& a) : lu_(a), perm_(static_cast<std::size_t>(a.rows())) {
  const Index n = a.rows();
  if (a.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "LU needs a square matrix");
  }
  for (Index i = 0; i < n; ++i) {
    perm_[static_cast<std::size_t>(i)] = i;
  }
  for (Index k = 0; k < n; ++k) {
    Index p = k;
    for (Index r = k + 1; r < n; ++r) {
      if (std::abs(lu_(r, k)) > std::abs(lu_(p, k))) {
        p = r;
      }
    }
    if (lu_(p, k) == 0.0 || !std::isfinite(lu_(p, k))) {
      throw Error(ErrorKind::SingularSystem, "zero pivot in block factorization");
    }
    if (p != k) {
      lu_.row(p).swap(lu_.row(k));
      std::swap(perm_[static_cast<std::size_t>(p)], perm_[static_cast<std::size_t>(k)]);
    }
    for (Index r = k + 1; r < n; ++r) {
      lu_(r, k) /= lu_(k, k);
      lu_.row(r).tail(n - k - 1) -= lu_(r, k) * lu_.row(k).tail(n - k - 1);
    }
  }
  if (n > 0) {
    const MatrixXd inv = solve(MatrixXd(MatrixXd::Identity(n, n)));
    condition_ = norm1(a) * norm1(inv);
    if (!(condition_ <= kMaxCondition)) {
      std::ostringstream msg;
      msg << "pivot block condition estimate " << condition_ << " exceeds 1e14";
      throw Error(ErrorKind::SingularSystem, msg.str());
    }
  }
}

VectorXd DenseLU::solve(const VectorXd& rhs) const {
  const Index n = lu_.rows();
  if (rhs.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "right-hand side has wrong length");
  }
  VectorXd x(n);
  for (Index i = 0; i < n; ++i) {
    x(i) = rhs(perm_[static_cast<std::size_t>(i)]);
  }
  for (Index i = 1; i < n; ++i) {
    x(i) -= lu_.row(i).head(i).dot(x.head(i));
  }
  for (Index i = n - 1; i >= 0; --i) {
    x(i) = (x(i) - lu_.row(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / lu_(i, i);
  }
  return x;
}

MatrixXd DenseLU::solve(const MatrixXd& rhs) const {
  MatrixXd out(rhs.rows(), rhs.cols());
  for (Index j = 0; j < rhs.cols(); ++j) {
    out.col(j) = solve(VectorXd(rhs.col(j)));
  }
  return out;
}

// --- BlockTriDiag -----------------------------------------------------------

BlockTriDiag::BlockTriDiag(int n_blocks, int block_dim)
    : n_blocks_(n_blocks), block_dim_(block_dim) {
  if (n_blocks < 1 || block_dim < 1) {
    throw Error(ErrorKind::InvalidArgument, "block tridiagonal matrix needs positive sizes");
  }
  const MatrixXd zero = MatrixXd::Zero(block_dim, block_dim);
  diag_.assign(static_cast<std::size_t>(n_blocks), zero);
  lower_.assign(static_cast<std::size_t>(n_blocks - 1), zero);
  upper_.assign(static_cast<std::size_t>(n_blocks - 1), zero);
}

MatrixXd& BlockTriDiag::block(int row, int col) {
  if (row < 0 || col < 0 || row >= n_blocks_ || col >= n_blocks_) {
    throw Error(ErrorKind::DimensionMismatch, "block index out of range");
  }
  if (row == col) return diagonal(row);
  if (row == col + 1) return lower(col);
  if (col == row + 1) return upper(row);
  throw Error(ErrorKind::DimensionMismatch, "block outside the tridiagonal pattern");
}

VectorXd BlockTriDiag::multiply(const VectorXd& x) const {
  if (x.size() != dim()) {
    throw Error(ErrorKind::DimensionMismatch, "vector length does not match matrix");
  }
  const int m = block_dim_;
  VectorXd y = VectorXd::Zero(dim());
  for (int i = 0; i < n_blocks_; ++i) {
    y.segment(i * m, m) += diagonal(i) * x.segment(i * m, m);
    if (i + 1 < n_blocks_) {
      y.segment(i * m, m) += upper(i) * x.segment((i + 1) * m, m);
      y.segment((i + 1) * m, m) += lower(i) * x.segment(i * m, m);
    }
  }
  return y;
}

MatrixXd BlockTriDiag::to_dense() const {
  const int m = block_dim_;
  MatrixXd a = MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < n_blocks_; ++i) {
    a.block(i * m, i * m, m, m) = diagonal(i);
    if (i + 1 < n_blocks_) {
      a.block(i * m, (i + 1) * m, m, m) = upper(i);
      a.block((i + 1) * m, i * m, m, m) = lower(i);
    }
  }
  return a;
}

BlockTriDiag BlockTriDiag::transpose() const {
  BlockTriDiag t(n_blocks_, block_dim_);
  for (int i = 0; i < n_blocks_; ++i) {
    t.diagonal(i) = diagonal(i).transpose();
    if (i + 1 < n_blocks_) {
      t.upper(i) = lower(i).transpose();
      t.lower(i) = upper(i).transpose();
    }
  }
  return t;
}

BlockTriDiag& BlockTriDiag::operator*=(double s) {
  for (auto& b : diag_) b *= s;
  for (auto& b : lower_) b *= s;
  for (auto& b : upper_) b *= s;
  return *this;
}

BlockTriDiagLU BlockTriDiag::factorize() const { return BlockTriDiagLU(*this); }

BlockTriDiagLU::BlockTriDiagLU(const BlockTriDiag& a) : block_dim_(a.block_dim()) {
  const int n = a.n_blocks();
  pivots_.reserve(static_cast<std::size_t>(n));
  lower_.reserve(static_cast<std::size_t>(n - 1));
  upper_.reserve(static_cast<std::size_t>(n - 1));
  pivots_.emplace_back(a.diagonal(0));
  for (int i = 1; i < n; ++i) {
    lower_.push_back(a.lower(i - 1));
    upper_.push_back(a.upper(i - 1));
    // S_i = D_i - L_{i-1} S_{i-1}^{-1} U_{i-1}
    const MatrixXd schur = a.diagonal(i) - a.lower(i - 1) * pivots_.back().solve(a.upper(i - 1));
    pivots_.emplace_back(schur);
  }
}

VectorXd BlockTriDiagLU::solve(const VectorXd& rhs) const {
  const int n = static_cast<int>(pivots_.size());
  const int m = block_dim_;
  if (rhs.size() != dim()) {
    throw Error(ErrorKind::DimensionMismatch, "right-hand side has wrong length");
  }
  std::vector<VectorXd> z(static_cast<std::size_t>(n));
  z[0] = rhs.segment(0, m);
  for (int i = 1; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    z[k] = rhs.segment(i * m, m) - lower_[k - 1] * pivots_[k - 1].solve(z[k - 1]);
  }
  VectorXd x(dim());
  VectorXd next = pivots_.back().solve(z.back());
  x.segment((n - 1) * m, m) = next;
  for (int i = n - 2; i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    next = pivots_[k].solve(VectorXd(z[k] - upper_[k] * next));
    x.segment(i * m, m) = next;
  }
  return x;
}

VectorXd solve_block_tridiagonal(const BlockTriDiag& a, const VectorXd& b) {
  return -a.factorize().solve(b);
}

// --- BandedMatrix -----------------------------------------------------------

BandedMatrix::BandedMatrix(Index dim, int lower_bw, int upper_bw)
    : dim_(dim), lower_bw_(lower_bw), upper_bw_(upper_bw) {
  if (dim < 1 || lower_bw < 0 || upper_bw < 0) {
    throw Error(ErrorKind::InvalidArgument, "banded matrix needs dim >= 1 and bandwidths >= 0");
  }
  bands_.assign(static_cast<std::size_t>(dim * (lower_bw + upper_bw + 1)), 0.0);
}

double BandedMatrix::operator()(Index row, Index col) const {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_ || !in_band(row, col)) {
    return 0.0;
  }
  return bands_[static_cast<std::size_t>(row * (lower_bw_ + upper_bw_ + 1) + (col - row + lower_bw_))];
}

double& BandedMatrix::at(Index row, Index col) {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_ || !in_band(row, col)) {
    std::ostringstream msg;
    msg << "entry (" << row << ", " << col << ") outside the band";
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  return bands_[static_cast<std::size_t>(row * (lower_bw_ + upper_bw_ + 1) + (col - row + lower_bw_))];
}

VectorXd BandedMatrix::multiply(const VectorXd& x) const {
  if (x.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "vector length does not match matrix");
  }
  VectorXd y = VectorXd::Zero(dim_);
  for (Index r = 0; r < dim_; ++r) {
    const Index c0 = std::max<Index>(0, r - lower_bw_);
    const Index c1 = std::min<Index>(dim_ - 1, r + upper_bw_);
    for (Index c = c0; c <= c1; ++c) {
      y(r) += (*this)(r, c) * x(c);
    }
  }
  return y;
}

MatrixXd BandedMatrix::to_dense() const {
  MatrixXd a = MatrixXd::Zero(dim_, dim_);
  for (Index r = 0; r < dim_; ++r) {
    const Index c0 = std::max<Index>(0, r - lower_bw_);
    const Index c1 = std::min<Index>(dim_ - 1, r + upper_bw_);
    for (Index c = c0; c <= c1; ++c) {
      a(r, c) = (*this)(r, c);
    }
  }
  return a;
}

BandedMatrix& BandedMatrix::operator*=(double s) {
  for (double& v : bands_) v *= s;
  return *this;
}

BandedLU BandedMatrix::factorize() const { return BandedLU(*this); }

BandedLU::BandedLU(const BandedMatrix& a)
    : dim_(a.dim()),
      lower_bw_(a.lower_bw()),
      upper_bw_(a.upper_bw() + a.lower_bw()),
      width_(2 * static_cast<Index>(a.lower_bw()) + a.upper_bw() + 1),
      work_(static_cast<std::size_t>(a.dim() * (2 * static_cast<Index>(a.lower_bw()) + a.upper_bw() + 1)), 0.0),
      pivot_rows_(static_cast<std::size_t>(a.dim())) {
  const Index n = dim_;
  for (Index r = 0; r < n; ++r) {
    const Index c0 = std::max<Index>(0, r - a.lower_bw());
    const Index c1 = std::min<Index>(n - 1, r + a.upper_bw());
    for (Index c = c0; c <= c1; ++c) {
      entry(r, c) = a(r, c);
    }
  }
  double max_pivot = 0.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) {
    const Index last_row = std::min<Index>(n - 1, k + lower_bw_);
    const Index last_col = std::min<Index>(n - 1, k + upper_bw_);
    Index p = k;
    for (Index r = k + 1; r <= last_row; ++r) {
      if (std::abs(entry(r, k)) > std::abs(entry(p, k))) {
        p = r;
      }
    }
    pivot_rows_[static_cast<std::size_t>(k)] = p;
    const double pivot = entry(p, k);
    if (pivot == 0.0 || !std::isfinite(pivot)) {
      throw Error(ErrorKind::SingularSystem, "zero pivot in banded factorization");
    }
    if (p != k) {
      for (Index c = k; c <= last_col; ++c) {
        std::swap(entry(k, c), entry(p, c));
      }
    }
    max_pivot = std::max(max_pivot, std::abs(pivot));
    min_pivot = std::min(min_pivot, std::abs(pivot));
    for (Index r = k + 1; r <= last_row; ++r) {
      const double l = entry(r, k) / pivot;
      entry(r, k) = l;
      if (l != 0.0) {
        for (Index c = k + 1; c <= last_col; ++c) {
          entry(r, c) -= l * entry(k, c);
        }
      }
    }
  }
  if (max_pivot > kMaxCondition * min_pivot) {
    std::ostringstream msg;
    msg << "pivot spread " << max_pivot / min_pivot << " exceeds 1e14";
    throw Error(ErrorKind::SingularSystem, msg.str());
  }
}

VectorXd BandedLU::solve(const VectorXd& rhs) const {
  const Index n = dim_;
  if (rhs.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "right-hand side has wrong length");
  }
  VectorXd x = rhs;
  for (Index k = 0; k < n; ++k) {
    const Index p = pivot_rows_[static_cast<std::size_t>(k)];
    if (p != k) {
      std::swap(x(k), x(p));
    }
    const Index last_row = std::min<Index>(n - 1, k + lower_bw_);
    for (Index r = k + 1; r <= last_row; ++r) {
      x(r) -= entry(r, k) * x(k);
    }
  }
  for (Index k = n - 1; k >= 0; --k) {
    const Index last_col = std::min<Index>(n - 1, k + upper_bw_);
    double s = x(k);
    for (Index c = k + 1; c <= last_col; ++c) {
      s -= entry(k, c) * x(c);
    }
    x(k) = s / entry(k, k);
  }
  return x;
}

VectorXd solve_banded(const BandedMatrix& a, const VectorXd& b) { return -a.factorize().solve(b); }

// --- assembly -----------------------------------------------------------------

void scatter(const IndexedElement& element, VectorXd* residual, BandedMatrix* jacobian) {
  const auto n = static_cast<Index>(element.dofs.size());
  if (element.residual.size() != n ||
      (jacobian && (element.jacobian.rows() != n || element.jacobian.cols() != n))) {
    throw Error(ErrorKind::DimensionMismatch, "element data does not match its dof list");
  }
  for (Index a = 0; a < n; ++a) {
    const Index row = element.dofs[static_cast<std::size_t>(a)];
    if (row < 0) {
      continue;
    }
    if (residual) {
      (*residual)(row) += element.residual(a);
    }
    if (jacobian) {
      for (Index b = 0; b < n; ++b) {
        const Index col = element.dofs[static_cast<std::size_t>(b)];
        if (col >= 0 && element.jacobian(a, b) != 0.0) {
          jacobian->add(row, col, element.jacobian(a, b));
        }
      }
    }
  }
}

}  // namespace bundle_newton::fem1d
