#pragma once

// Structure-recovery metrics summed over all graphs and pairs s < t.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cvn/adjacency.hpp"
#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"

namespace cvn {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Confusion confusion(const std::vector<Adjacency>& truth, const std::vector<Adjacency>& est) {
  if (truth.size() != est.size())
    throw DimensionError("confusion: " + std::to_string(truth.size()) + " true graphs vs " +
                         std::to_string(est.size()) + " estimated");
  Confusion c;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto& a = truth[k];
    const auto& b = est[k];
    if (a.dim() != b.dim()) throw DimensionError("confusion: graph dimensions differ");
    for (int s = 0; s < a.dim(); ++s) {
      for (int t = s + 1; t < a.dim(); ++t) {
        const bool x = a(s, t), y = b(s, t);
        c.tp += x && y;
        c.fp += !x && y;
        c.fn += x && !y;
      }
    }
  }
  return c;
}

/// 0/0 ratios are defined as 0.
inline PrecisionRecall precision_recall_f1(const Confusion& c) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  PrecisionRecall out;
  out.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  out.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

/// Number of pairs s < t present in exactly one of the two graphs.
inline std::size_t hamming(const Adjacency& a, const Adjacency& b) {
  if (a.dim() != b.dim()) throw DimensionError("hamming: graph dimensions differ");
  std::size_t d = 0;
  for (int s = 0; s < a.dim(); ++s)
    for (int t = s + 1; t < a.dim(); ++t) d += a(s, t) != b(s, t);
  return d;
}

/// Pairwise Hamming distances between graphs, m x m.
inline Matrix hamming_matrix(const std::vector<Adjacency>& graphs) {
  const auto m = static_cast<Index>(graphs.size());
  Matrix h = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j)
      h(i, j) = h(j, i) = static_cast<double>(hamming(graphs[static_cast<std::size_t>(i)],
                                                      graphs[static_cast<std::size_t>(j)]));
  return h;
}

/// One tuning-grid cell's estimated graphs.
struct GridEstimate {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::vector<Adjacency> graphs;
};

struct OracleResult {
  double f1 = 0.0;
  std::size_t cell = 0;
};

/// Maximum F1 over the grid; ties go to the larger gamma1, then larger gamma2.
inline OracleResult oracle_f1(const std::vector<Adjacency>& truth, const std::vector<GridEstimate>& grid) {
  if (grid.empty()) throw EmptyGrid("oracle_f1: empty grid");
  OracleResult best{-1.0, 0};
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double f1 = precision_recall_f1(confusion(truth, grid[c].graphs)).f1;
    const auto& cur = grid[best.cell];
    const bool better =
        f1 > best.f1 ||
        (f1 == best.f1 && (grid[c].gamma1 > cur.gamma1 ||
                           (grid[c].gamma1 == cur.gamma1 && grid[c].gamma2 > cur.gamma2)));
    if (better) best = {f1, c};
  }
  return best;
}

}  // namespace cvn
