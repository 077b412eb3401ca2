#pragma once

// Dense symmetric matrix primitives.

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cvn/errors.hpp"

namespace cvn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Pivot threshold below which a matrix is declared not positive definite.
inline constexpr double kPdPivotTol = 1e-12;

/// Dense p x p symmetric matrix. Every write goes to both (s,t) and (t,s), and
/// construction from a general matrix mirrors the upper triangle, so the
/// stored entries are exactly symmetric.
class SymMat {
 public:
  SymMat() = default;

  explicit SymMat(Index p, double diag = 0.0) : m_(Matrix::Zero(p, p)) {
    if (p < 0) throw InvalidDimension("SymMat: negative dimension");
    m_.diagonal().setConstant(diag);
  }

  /// Builds from the upper triangle of `a`; the lower triangle is ignored.
  static SymMat from_upper(const Matrix& a) {
    if (a.rows() != a.cols()) {
      throw DimensionError("SymMat: matrix is " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) + ", expected square");
    }
    if (!a.allFinite()) throw NumericError("SymMat: non-finite entry");
    SymMat out;
    out.m_ = a.triangularView<Eigen::Upper>();
    out.m_.triangularView<Eigen::StrictlyLower>() = a.transpose();
    return out;
  }

  /// Builds from a matrix that must already be exactly symmetric.
  static SymMat checked(const Matrix& a) {
    SymMat out = from_upper(a);
    if (out.m_ != a) throw NumericError("SymMat: input is not symmetric");
    return out;
  }

  static SymMat identity(Index p) { return SymMat(p, 1.0); }

  static SymMat diagonal(const Vector& d) {
    SymMat out(d.size());
    out.m_.diagonal() = d;
    return out;
  }

  Index dim() const noexcept { return m_.rows(); }
  double operator()(Index s, Index t) const { return m_(s, t); }

  void set(Index s, Index t, double v) {
    m_(s, t) = v;
    m_(t, s) = v;
  }

  const Matrix& mat() const noexcept { return m_; }

  friend bool operator==(const SymMat& a, const SymMat& b) {
    return a.dim() == b.dim() && a.m_ == b.m_;
  }

 private:
  Matrix m_;
};

struct EigenPair {
  Matrix vectors;  // columns are eigenvectors
  Vector values;   // ascending
};

/// (1/n) sum_j x_j x_j^T over the rows of `rows`. No centering.
inline SymMat empirical_covariance(const Matrix& rows) {
  if (rows.rows() < 1 || rows.cols() < 1) {
    throw DimensionError("empirical_covariance: empty input");
  }
  if (!rows.allFinite()) throw NumericError("empirical_covariance: non-finite entry");
  Matrix s = (rows.transpose() * rows) / static_cast<double>(rows.rows());
  return SymMat::from_upper(s);
}

/// Full spectral decomposition with ascending eigenvalues. Each eigenvector is
/// signed so that its first component with magnitude above 1e-12 is positive.
inline EigenPair sym_eigen(const SymMat& a) {
  if (!a.mat().allFinite()) throw NumericError("sym_eigen: non-finite input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.mat());
  if (es.info() != Eigen::Success) throw NumericError("sym_eigen: decomposition failed");
  EigenPair out{es.eigenvectors(), es.eigenvalues()};
  for (Index j = 0; j < out.vectors.cols(); ++j) {
    for (Index i = 0; i < out.vectors.rows(); ++i) {
      const double v = out.vectors(i, j);
      if (std::abs(v) > 1e-12) {
        if (v < 0) out.vectors.col(j) = -out.vectors.col(j);
        break;
      }
    }
  }
  return out;
}

/// Lower-triangular L with L L^T = a.
inline Matrix cholesky(const SymMat& a) {
  if (!a.mat().allFinite()) throw NumericError("cholesky: non-finite input");
  const Index p = a.dim();
  Matrix l = Matrix::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    double pivot = a(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > kPdPivotTol)) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(pivot) + " at index " +
                                std::to_string(j));
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Index i = j + 1; i < p; ++i) {
      double v = a(i, j);
      for (Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / d;
    }
  }
  return l;
}

inline SymMat invert_pd(const SymMat& a) {
  const Matrix l = cholesky(a);
  const Matrix lower_inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(a.dim(), a.dim()));
  return SymMat::from_upper(lower_inv.transpose() * lower_inv);
}

/// log det(a) for positive definite a, via Cholesky.
inline double log_det_pd(const SymMat& a) {
  const Matrix l = cholesky(a);
  double out = 0.0;
  for (Index j = 0; j < l.rows(); ++j) out += std::log(l(j, j));
  return 2.0 * out;
}

/// Sum of absolute entries.
inline double entrywise_l1(const Matrix& a) { return a.cwiseAbs().sum(); }

}  // namespace cvn
