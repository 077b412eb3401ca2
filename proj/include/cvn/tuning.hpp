#pragma once

// Information criteria and (gamma1, gamma2) grid search.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/model.hpp"
#include "cvn/parallel.hpp"
#include "cvn/solver.hpp"

namespace cvn {

/// (n/2) [tr(S Theta) - log det Theta].
inline double neg_log_likelihood(const SymMat& cov, int n, const SymMat& theta) {
  if (cov.dim() != theta.dim()) throw DimensionError("neg_log_likelihood: dimension mismatch");
  const double trace = (cov.mat().array() * theta.mat().array()).sum();
  return 0.5 * static_cast<double>(n) * (trace - log_det_pd(theta));
}

/// Matrix entries counted as non-zero: the p diagonal entries plus both copies
/// of every detected edge.
inline std::size_t l0_count(const Adjacency& a) {
  return static_cast<std::size_t>(a.dim()) + 2 * a.edge_count();
}

namespace detail {

inline void check_fit_matches(const CvnFit& fit, const CvnProblem& problem) {
  if (fit.p != problem.p || fit.m != problem.m || fit.theta.size() != problem.graphs.size() ||
      fit.adjacency.size() != problem.graphs.size())
    throw DimensionError("fit does not match problem (p=" + std::to_string(fit.p) + " vs " +
                         std::to_string(problem.p) + ", m=" + std::to_string(fit.m) + " vs " +
                         std::to_string(problem.m) + ")");
}

inline double criterion(const CvnFit& fit, const CvnProblem& problem, bool bic) {
  check_fit_matches(fit, problem);
  double out = 0.0;
  for (std::size_t i = 0; i < problem.graphs.size(); ++i) {
    const auto& g = problem.graphs[i];
    const double k = static_cast<double>(l0_count(fit.adjacency[i]));
    const double scale = bic ? 2.0 * std::log(static_cast<double>(g.n)) : 2.0;
    out += neg_log_likelihood(g.cov, g.n, fit.theta[i]) + scale * k;
  }
  return out;
}

}  // namespace detail

inline double aic(const CvnFit& fit, const CvnProblem& problem) { return detail::criterion(fit, problem, false); }

/// Uses 2 log(n_i) per non-zero entry.
inline double bic(const CvnFit& fit, const CvnProblem& problem) { return detail::criterion(fit, problem, true); }

enum class Criterion { aic, bic };

inline Criterion parse_criterion(const std::string& s) {
  if (s == "aic" || s == "AIC") return Criterion::aic;
  if (s == "bic" || s == "BIC") return Criterion::bic;
  throw Error("unknown criterion '" + s + "' (expected aic or bic)");
}

inline std::vector<double> default_gamma_values() { return {1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3}; }

/// All (gamma1, gamma2) pairs over `values`, gamma1-major.
inline std::vector<Gammas> product_grid(const std::vector<double>& values) {
  std::vector<Gammas> out;
  for (double g1 : values)
    for (double g2 : values) out.push_back({g1, g2});
  return out;
}

inline std::vector<Gammas> default_grid() { return product_grid(default_gamma_values()); }

struct GridCell {
  Gammas gammas;
  Penalties penalties;
  double aic = NAN;
  double bic = NAN;
  std::vector<std::size_t> edges;  // per graph
  bool converged = false;
  int iterations = 0;
  std::string error;  // set when the solver threw instead of returning
  std::shared_ptr<const CvnFit> fit;
};

struct GridResult {
  std::vector<GridCell> cells;
  Criterion criterion = Criterion::aic;
  std::size_t best = 0;

  std::size_t converged_count() const {
    std::size_t c = 0;
    for (const auto& cell : cells) c += cell.converged;
    return c;
  }
};

namespace detail {

inline bool prefer_on_tie(const Gammas& a, const Gammas& b) {
  return a.gamma1 > b.gamma1 || (a.gamma1 == b.gamma1 && a.gamma2 > b.gamma2);
}

}  // namespace detail

/// Index of the converged cell minimizing `value`; ties go to the larger
/// gamma1, then the larger gamma2.
template <class Value>
std::size_t select_cell(const std::vector<GridCell>& cells, Value value) {
  std::size_t best = cells.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!cells[c].converged) continue;
    if (best == cells.size()) {
      best = c;
      continue;
    }
    const double v = value(cells[c]), b = value(cells[best]);
    if (v < b || (v == b && detail::prefer_on_tie(cells[c].gammas, cells[best].gammas))) best = c;
  }
  if (best == cells.size()) throw NoConvergedCell("no grid cell converged");
  return best;
}

inline std::size_t select_cell(const std::vector<GridCell>& cells, Criterion criterion) {
  return select_cell(cells, [criterion](const GridCell& c) { return criterion == Criterion::aic ? c.aic : c.bic; });
}

/// Fits every cell independently. `opts.threads` workers run cells in
/// parallel; each fit itself is single-threaded. Cells whose solver throws a
/// ConvergenceFailure are kept with converged = false and the message in
/// `error`.
inline GridResult grid_search(const CvnProblem& problem, const std::vector<Gammas>& grid, Criterion criterion,
                              const FitOptions& opts) {
  if (grid.empty()) throw EmptyGrid("grid_search: empty grid");
  problem.validate();
  GridResult out;
  out.criterion = criterion;
  out.cells.resize(grid.size());
  FitOptions cell_opts = opts;
  cell_opts.threads = 1;
  parallel_for(grid.size(), opts.threads, [&](std::size_t c) {
    GridCell& cell = out.cells[c];
    cell.gammas = grid[c];
    cell.penalties = gamma_to_lambda(grid[c], problem.m, problem.p);
    try {
      auto f = std::make_shared<CvnFit>(fit(problem, cell.penalties, cell_opts));
      f->gammas = grid[c];
      cell.converged = f->converged;
      cell.iterations = f->iterations;
      for (const auto& a : f->adjacency) cell.edges.push_back(a.edge_count());
      cell.aic = aic(*f, problem);
      cell.bic = bic(*f, problem);
      cell.fit = std::move(f);
    } catch (const ConvergenceFailure& e) {
      cell.error = e.what();
    }
  });
  out.best = select_cell(out.cells, criterion);
  return out;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One row per cell. Edge columns are edges_1..edges_m.
inline std::string grid_result_csv(const GridResult& r) {
  std::size_t m = 0;
  for (const auto& c : r.cells) m = std::max(m, c.edges.size());
  std::ostringstream os;
  os << "gamma1,gamma2,lambda1,lambda2,aic,bic,converged,iterations,selected";
  for (std::size_t i = 0; i < m; ++i) os << ",edges_" << i + 1;
  os << '\n';
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const auto& cell = r.cells[c];
    os << detail::fmt17(cell.gammas.gamma1) << ',' << detail::fmt17(cell.gammas.gamma2) << ','
       << detail::fmt17(cell.penalties.lambda1) << ',' << detail::fmt17(cell.penalties.lambda2) << ','
       << detail::fmt17(cell.aic) << ',' << detail::fmt17(cell.bic) << ',' << (cell.converged ? 1 : 0) << ','
       << cell.iterations << ',' << (c == r.best ? 1 : 0);
    for (std::size_t i = 0; i < m; ++i) {
      os << ',';
      if (i < cell.edges.size()) os << cell.edges[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cvn
