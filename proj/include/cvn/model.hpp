#pragma once

// Problem definition: grouped data, meta-graph weights, penalty
// parameterizations.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"

namespace cvn {

/// Symmetric m x m meta-graph adjacency with zero diagonal and entries in [0,1].
class WeightMatrix {
 public:
  WeightMatrix() = default;

  explicit WeightMatrix(Matrix w) : w_(std::move(w)) {
    if (w_.rows() != w_.cols()) throw DimensionError("WeightMatrix: not square");
    if (w_.rows() < 1) throw InvalidDimension("WeightMatrix: m must be at least 1");
    for (Index i = 0; i < w_.rows(); ++i) {
      if (w_(i, i) != 0.0) throw Error("WeightMatrix: diagonal entry " + std::to_string(i) + " is not 0");
      for (Index j = 0; j < w_.cols(); ++j) {
        const double v = w_(i, j);
        if (!(v >= 0.0 && v <= 1.0)) throw Error("WeightMatrix: entry outside [0,1]");
        if (v != w_(j, i)) throw Error("WeightMatrix: not symmetric");
      }
    }
  }

  static WeightMatrix zero(int m) {
    if (m < 1) throw InvalidDimension("WeightMatrix: m must be at least 1");
    return WeightMatrix(Matrix::Zero(m, m));
  }

  int m() const noexcept { return static_cast<int>(w_.rows()); }
  double operator()(int i, int j) const { return w_(i, j); }
  const Matrix& mat() const noexcept { return w_; }

  /// Number of pairs i < j with positive weight.
  int edge_count() const {
    int n = 0;
    for (int i = 0; i < m(); ++i)
      for (int j = i + 1; j < m(); ++j) n += w_(i, j) > 0.0;
    return n;
  }

  friend bool operator==(const WeightMatrix& a, const WeightMatrix& b) { return a.w_ == b.w_; }

 private:
  Matrix w_;
};

using GraphKey = std::vector<std::string>;

struct GraphData {
  GraphKey key;
  int n = 0;
  SymMat cov;
};

struct CvnProblem {
  int p = 0;
  int m = 0;
  std::vector<std::string> variables;
  std::vector<GraphData> graphs;
  WeightMatrix weights;

  /// Throws if the invariants do not hold.
  void validate() const {
    if (p < 1) throw InvalidDimension("CvnProblem: p must be at least 1");
    if (m < 1 || static_cast<int>(graphs.size()) != m) {
      throw DimensionError("CvnProblem: graph count " + std::to_string(graphs.size()) +
                           " does not match m = " + std::to_string(m));
    }
    if (weights.m() != m) {
      throw DimensionError("CvnProblem: weight matrix is " + std::to_string(weights.m()) + "x" +
                           std::to_string(weights.m()) + " but there are m = " +
                           std::to_string(m) + " graphs");
    }
    if (!variables.empty() && static_cast<int>(variables.size()) != p) {
      throw DimensionError("CvnProblem: variable names do not match p");
    }
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& g = graphs[i];
      if (g.n < 1) throw EmptyData("CvnProblem: graph " + std::to_string(i) + " has no observations");
      if (g.cov.dim() != p) throw DimensionError("CvnProblem: covariance dimension mismatch");
      for (std::size_t j = 0; j < i; ++j)
        if (graphs[j].key == g.key) throw Error("CvnProblem: duplicate graph key");
    }
  }

  std::string variable_name(int s) const {
    return variables.empty() ? "X" + std::to_string(s + 1) : variables[static_cast<std::size_t>(s)];
  }
};

struct Penalties {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

struct Gammas {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

namespace detail {

inline void check_penalty(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw Error(std::string(name) + " must be finite and non-negative");
}

inline void check_conversion_dims(int m, int p, double second) {
  if (p < 2) throw InvalidDimension("penalty conversion requires p >= 2");
  if (m < 1) throw InvalidDimension("penalty conversion requires m >= 1");
  if (m < 2 && second > 0.0) throw InvalidDimension("smoothness penalty conversion requires m >= 2");
}

}  // namespace detail

namespace detail {

/// g * c, nudged by up to two ulps so that dividing the result by c gives g
/// back. Makes gamma -> lambda -> gamma exact.
inline double exact_product(double g, double c) {
  const double x = g * c;
  if (x / c == g) return x;
  double lo = x, hi = x;
  for (int k = 0; k < 2; ++k) {
    lo = std::nextafter(lo, -INFINITY);
    hi = std::nextafter(hi, INFINITY);
    if (lo / c == g) return lo;
    if (hi / c == g) return hi;
  }
  return x;
}

inline double lambda1_scale(int m, int p) { return double(m) * p * (p - 1.0) / 2.0; }
inline double lambda2_scale(int m, int p) { return double(m) * (m - 1.0) * p * (p - 1.0) / 4.0; }

}  // namespace detail

/// Per-edge parameterization to the global one:
/// lambda1 = gamma1 m p (p-1) / 2, lambda2 = gamma2 m (m-1) p (p-1) / 4.
inline Penalties gamma_to_lambda(const Gammas& g, int m, int p) {
  detail::check_penalty(g.gamma1, "gamma1");
  detail::check_penalty(g.gamma2, "gamma2");
  detail::check_conversion_dims(m, p, g.gamma2);
  return {detail::exact_product(g.gamma1, detail::lambda1_scale(m, p)),
          g.gamma2 == 0.0 ? 0.0 : detail::exact_product(g.gamma2, detail::lambda2_scale(m, p))};
}

inline Gammas lambda_to_gamma(const Penalties& l, int m, int p) {
  detail::check_penalty(l.lambda1, "lambda1");
  detail::check_penalty(l.lambda2, "lambda2");
  detail::check_conversion_dims(m, p, l.lambda2);
  const double c2 = detail::lambda2_scale(m, p);
  return {l.lambda1 / detail::lambda1_scale(m, p), c2 > 0.0 ? l.lambda2 / c2 : 0.0};
}

/// Chain meta-graph over t time points.
inline WeightMatrix weights_tvgl(int t) {
  if (t < 1) throw InvalidDimension("weights_tvgl: t must be at least 1");
  Matrix w = Matrix::Zero(t, t);
  for (int i = 0; i + 1 < t; ++i) w(i, i + 1) = w(i + 1, i) = 1.0;
  return WeightMatrix(std::move(w));
}

/// Fully connected meta-graph.
inline WeightMatrix weights_fgl(int m) {
  if (m < 1) throw InvalidDimension("weights_fgl: m must be at least 1");
  Matrix w = Matrix::Ones(m, m);
  w.diagonal().setZero();
  return WeightMatrix(std::move(w));
}

/// 4-neighbour lattice over rows x cols cells, row-major indexing.
inline WeightMatrix weights_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw InvalidDimension("weights_grid: rows and cols must be at least 1");
  const int m = rows * cols;
  Matrix w = Matrix::Zero(m, m);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) w(i, i + 1) = w(i + 1, i) = 1.0;
      if (r + 1 < rows) w(i, i + cols) = w(i + cols, i) = 1.0;
    }
  }
  return WeightMatrix(std::move(w));
}

/// A parsed CSV table: header plus string cells.
struct LongTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline double parse_double(std::string_view cell, std::size_t row, const std::string& column) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row + 1) + ", column '" + column +
                     "': not a finite number: '" + std::string(cell) + "'");
  }
  return v;
}

namespace detail {

struct GroupedRows {
  std::vector<std::size_t> covariate_idx;
  std::vector<std::size_t> variable_idx;
  std::map<GraphKey, std::vector<std::size_t>> groups;  // ordered lexicographically
};

inline GroupedRows group_rows(const LongTable& table, const std::vector<std::string>& covariates) {
  if (table.rows.empty()) throw EmptyData("dataset has no rows");
  GroupedRows out;
  for (const auto& name : covariates) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw ParseError("covariate column '" + name + "' not found");
    out.covariate_idx.push_back(static_cast<std::size_t>(it - table.header.begin()));
  }
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(out.covariate_idx.begin(), out.covariate_idx.end(), c) == out.covariate_idx.end())
      out.variable_idx.push_back(c);
  }
  if (out.variable_idx.empty()) throw ParseError("dataset has no variable columns");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw ParseError("row " + std::to_string(r + 1) + ": expected " +
                       std::to_string(table.header.size()) + " cells, got " + std::to_string(row.size()));
    }
    GraphKey key;
    for (auto c : out.covariate_idx) key.push_back(row[c]);
    out.groups[key].push_back(r);
  }
  return out;
}

}  // namespace detail

/// Groups rows by covariate-level combination (ordered lexicographically by
/// labels) and computes each group's empirical covariance. The weight matrix
/// is left as the zero matrix of the discovered size.
inline CvnProblem build_problem(const LongTable& table, const std::vector<std::string>& covariates) {
  const auto grouped = detail::group_rows(table, covariates);
  CvnProblem prob;
  prob.p = static_cast<int>(grouped.variable_idx.size());
  for (auto c : grouped.variable_idx) prob.variables.push_back(table.header[c]);
  for (const auto& [key, rows] : grouped.groups) {
    std::vector<std::vector<double>> values;
    for (auto r : rows) {
      std::vector<double> v;
      for (auto col : grouped.variable_idx) v.push_back(parse_double(table.rows[r][col], r, table.header[col]));
      values.push_back(std::move(v));
    }
    // A canonical row order keeps the covariance bitwise independent of input order.
    std::sort(values.begin(), values.end());
    Matrix x(static_cast<Index>(values.size()), prob.p);
    for (std::size_t r = 0; r < values.size(); ++r)
      for (int j = 0; j < prob.p; ++j) x(static_cast<Index>(r), j) = values[r][static_cast<std::size_t>(j)];
    prob.graphs.push_back({key, static_cast<int>(rows.size()), empirical_covariance(x)});
  }
  prob.m = static_cast<int>(prob.graphs.size());
  prob.weights = WeightMatrix::zero(prob.m);
  return prob;
}

/// Centers and scales every variable column to unit variance within each
/// covariate group. Returns a new table; columns with zero variance are only
/// centered.
inline LongTable standardize_within_groups(const LongTable& table,
                                           const std::vector<std::string>& covariates) {
  const auto grouped = detail::group_rows(table, covariates);
  LongTable out = table;
  char buf[64];
  for (const auto& [key, rows] : grouped.groups) {
    for (auto col : grouped.variable_idx) {
      std::vector<double> v;
      v.reserve(rows.size());
      for (auto r : rows) v.push_back(parse_double(table.rows[r][col], r, table.header[col]));
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), (v[k] - mean) / sd,
                                       std::chars_format::general, 17);
        out.rows[rows[k]][col] = std::string(buf, res.ptr);
      }
    }
  }
  return out;
}

}  // namespace cvn
