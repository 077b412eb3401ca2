#pragma once

// Weighted fused lasso signal approximator:
//
//   minimize_b  1/2 ||y - b||^2 + eta1 ||b||_1 + eta2 sum_{i<j} w_ij |b_i - b_j|
//
// written as the generalized lasso 1/2 ||y - b||^2 + ||D b||_1 and solved by
// ADMM on the split z = D b. The factorization of (I + rho D^T D) depends only
// on (W, eta1, eta2, rho) and is shared by every solve.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/model.hpp"

namespace cvn {

struct WflsaOptions {
  double rho_in = 1.0;
  double tol = 1e-8;  // on max(primal, dual) residual, infinity norm
  int max_iter = 10000;
};

/// One penalty term weight * |b_i - b_j|, or weight * |b_i| when j < 0. The
/// matching row of the difference operator D is (e_i - e_j) or e_i.
struct PenaltyRow {
  int i = 0;
  int j = -1;
  double weight = 0.0;
};

class WflsaWorkspace {
 public:
  int dim() const noexcept { return m_; }
  double eta1() const noexcept { return eta1_; }
  double eta2() const noexcept { return eta2_; }
  const WflsaOptions& options() const noexcept { return opts_; }
  const std::vector<PenaltyRow>& rows() const noexcept { return rows_; }

  /// True when the penalty matrix has no fusion rows, in which case the
  /// problem decouples into scalar soft-thresholding.
  bool separable() const noexcept { return fusion_rows_ == 0; }

  /// Dense difference operator D, one row per PenaltyRow.
  Matrix penalty_matrix() const {
    Matrix d = Matrix::Zero(static_cast<Index>(rows_.size()), m_);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      d(static_cast<Index>(r), rows_[r].i) = 1.0;
      if (rows_[r].j >= 0) d(static_cast<Index>(r), rows_[r].j) = -1.0;
    }
    return d;
  }

  /// Lower Cholesky factor of (I + rho_in D^T D).
  const Matrix& factor() const noexcept { return factor_; }

  /// (I + rho_in D^T D)^{-1}, formed once from the factor.
  const Matrix& inverse() const noexcept { return inverse_; }

 private:
  friend WflsaWorkspace wflsa_prepare(const WeightMatrix&, double, double, const WflsaOptions&);

  int m_ = 0;
  double eta1_ = 0.0;
  double eta2_ = 0.0;
  WflsaOptions opts_;
  std::vector<PenaltyRow> rows_;
  int fusion_rows_ = 0;
  Matrix factor_;
  Matrix inverse_;
};

inline WflsaWorkspace wflsa_prepare(const WeightMatrix& w, double eta1, double eta2,
                                    const WflsaOptions& opts = {}) {
  if (!std::isfinite(eta1) || eta1 < 0.0 || !std::isfinite(eta2) || eta2 < 0.0) {
    throw Error("wflsa_prepare: penalties must be finite and non-negative");
  }
  if (!(opts.rho_in > 0.0)) throw Error("wflsa_prepare: rho_in must be positive");
  WflsaWorkspace ws;
  ws.m_ = w.m();
  ws.eta1_ = eta1;
  ws.eta2_ = eta2;
  ws.opts_ = opts;
  if (eta1 > 0.0) {
    for (int i = 0; i < ws.m_; ++i) ws.rows_.push_back({i, -1, eta1});
  }
  if (eta2 > 0.0) {
    for (int i = 0; i < ws.m_; ++i) {
      for (int j = i + 1; j < ws.m_; ++j) {
        if (w(i, j) > 0.0) {
          ws.rows_.push_back({i, j, eta2 * w(i, j)});
          ++ws.fusion_rows_;
        }
      }
    }
  }
  const Matrix d = ws.penalty_matrix();
  Matrix gram = Matrix::Identity(ws.m_, ws.m_) + opts.rho_in * d.transpose() * d;
  ws.factor_ = cholesky(SymMat::from_upper(gram));
  const Matrix lower_inv =
      ws.factor_.triangularView<Eigen::Lower>().solve(Matrix::Identity(ws.m_, ws.m_));
  ws.inverse_ = lower_inv.transpose() * lower_inv;
  return ws;
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Objective value of the wFLSA at b.
inline double wflsa_objective(const WflsaWorkspace& ws, const Vector& y, const Vector& b) {
  double f = 0.5 * (y - b).squaredNorm();
  for (const auto& r : ws.rows()) f += r.weight * std::abs(b[r.i] - (r.j >= 0 ? b[r.j] : 0.0));
  return f;
}

/// ADMM split variables carried between solves of neighbouring problems.
struct WflsaWarmStart {
  Vector z;  // D b
  Vector u;  // scaled dual
  bool empty() const noexcept { return z.size() == 0; }
};

struct WflsaResult {
  Vector beta;
  /// Subgradient certificate: beta - y + D^T dual = 0 with |dual_r| <= weight_r
  /// and dual_r = weight_r * sign((D beta)_r) wherever (D beta)_r != 0.
  Vector dual;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

namespace detail {

/// Exact solution for the sparsity and fusion pattern read off the converged
/// split variable z: rows with z_r = 0 become constraints (D b)_r = 0, the
/// rest contribute weight_r sign(z_r). The constrained minimizer averages
/// y - D_active^T (weight * sign) over fused groups and zeroes any group tied
/// to an L1 row. Replaces `beta` only when the objective does not increase.
inline void polish(const WflsaWorkspace& ws, const Vector& y, const Vector& z, Vector& beta) {
  const int m = ws.dim();
  const auto& rows = ws.rows();
  std::vector<int> parent(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
      i = parent[static_cast<std::size_t>(i)];
    }
    return i;
  };
  std::vector<char> zeroed(static_cast<std::size_t>(m), 0);
  Vector g = y;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const double zr = z[static_cast<Index>(r)];
    if (zr == 0.0) {
      if (row.j < 0) zeroed[static_cast<std::size_t>(row.i)] = 1;
      else parent[static_cast<std::size_t>(find(row.i))] = find(row.j);
    } else {
      const double step = zr > 0.0 ? row.weight : -row.weight;
      g[row.i] -= step;
      if (row.j >= 0) g[row.j] += step;
    }
  }
  std::vector<double> sum(static_cast<std::size_t>(m), 0.0);
  std::vector<int> count(static_cast<std::size_t>(m), 0);
  std::vector<char> group_zero(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    const auto root = static_cast<std::size_t>(find(i));
    sum[root] += g[i];
    ++count[root];
    if (zeroed[static_cast<std::size_t>(i)]) group_zero[root] = 1;
  }
  Vector candidate(m);
  for (int i = 0; i < m; ++i) {
    const auto root = static_cast<std::size_t>(find(i));
    candidate[i] = group_zero[root] ? 0.0 : sum[root] / count[root];
  }
  if (wflsa_objective(ws, y, candidate) <= wflsa_objective(ws, y, beta)) beta = candidate;
}

}  // namespace detail

inline WflsaResult wflsa_solve_detailed(const WflsaWorkspace& ws, const Vector& y,
                                        WflsaWarmStart* warm = nullptr) {
  const int m = ws.dim();
  if (y.size() != m) throw DimensionError("wflsa_solve: y has wrong length");
  if (!y.allFinite()) throw NumericError("wflsa_solve: non-finite y");
  const auto& rows = ws.rows();
  const auto k = static_cast<Index>(rows.size());
  WflsaResult res;

  if (ws.separable()) {
    const double eta1 = ws.eta1();
    res.beta.resize(m);
    res.dual = Vector::Zero(k);
    for (int i = 0; i < m; ++i) {
      res.beta[i] = soft_threshold(y[i], eta1);
      if (k > 0) res.dual[i] = y[i] - res.beta[i];
    }
    return res;
  }

  const double rho = ws.options().rho_in;
  const double inv_rho = 1.0 / rho;
  const double tol = ws.options().tol;
  const Matrix& inv = ws.inverse();

  Vector z = Vector::Zero(k), u = Vector::Zero(k);
  if (warm != nullptr && warm->z.size() == k) {
    z = warm->z;
    u = warm->u;
  }
  Vector v(m), beta(m), dz(m);
  double primal = 0.0, dual = 0.0;
  int it = 0;
  for (; it < ws.options().max_iter; ++it) {
    // b-step: (I + rho D^T D) b = y + rho D^T (z - u)
    v = y;
    for (Index r = 0; r < k; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      const double d = rho * (z[r] - u[r]);
      v[row.i] += d;
      if (row.j >= 0) v[row.j] -= d;
    }
    beta.noalias() = inv * v;

    // z-step and u-step, accumulating residuals.
    primal = 0.0;
    dz.setZero();
    for (Index r = 0; r < k; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      const double db = beta[row.i] - (row.j >= 0 ? beta[row.j] : 0.0);
      const double t = db + u[r];
      const double znew = soft_threshold(t, row.weight * inv_rho);
      const double delta = rho * (znew - z[r]);
      dz[row.i] += delta;
      if (row.j >= 0) dz[row.j] -= delta;
      z[r] = znew;
      u[r] = t - znew;
      primal = std::max(primal, std::abs(db - znew));
    }
    dual = dz.cwiseAbs().maxCoeff();
    if (primal < tol && dual < tol) {
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.primal_residual = primal;
  res.dual_residual = dual;
  res.beta = beta;
  res.dual = rho * u;
  if (warm != nullptr) {
    warm->z = z;
    warm->u = u;
  }
  if (!(primal < tol && dual < tol)) {
    throw ConvergenceFailure("wflsa_solve: no convergence after " + std::to_string(it) +
                                 " iterations (primal " + std::to_string(primal) + ", dual " +
                                 std::to_string(dual) + ")",
                             beta, primal, dual);
  }
  detail::polish(ws, y, z, res.beta);
  return res;
}

inline Vector wflsa_solve(const WflsaWorkspace& ws, const Vector& y) {
  return wflsa_solve_detailed(ws, y).beta;
}

}  // namespace cvn
