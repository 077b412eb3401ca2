#pragma once

// Ground-truth generator for a 3 x 3 grid of graphs driven by two covariates.
// Graph (i,j) shares the cross-block edges of the starting graph; its first
// block changes along i and its second block along j.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cvn/adjacency.hpp"
#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/model.hpp"

namespace cvn {

/// Seedable generator with portable output: std::mt19937_64 is fully
/// specified by the standard, and the uniform/normal transforms below are
/// written out rather than taken from <random> distributions, whose
/// algorithms differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw Error("Rng::uniform_index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class GraphType { erdos_renyi, barabasi_albert };

inline std::string to_string(GraphType t) { return t == GraphType::erdos_renyi ? "er" : "ba"; }

inline GraphType parse_graph_type(const std::string& s) {
  if (s == "er" || s == "ER") return GraphType::erdos_renyi;
  if (s == "ba" || s == "BA") return GraphType::barabasi_albert;
  throw Error("unknown graph type '" + s + "' (expected er or ba)");
}

struct SimConfig {
  int p = 100;
  int n = 100;
  GraphType graph_type = GraphType::erdos_renyi;
  double pi = 0.1;
  double pi1 = 0.1;
  double pi2 = 0.1;
  double v = 0.4;
  double u = 0.1;
  int ba_edges = 1;  // edges added per arriving node
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 2) throw InvalidDimension("SimConfig: p must be at least 2");
    if (n < 1) throw InvalidDimension("SimConfig: n must be at least 1");
    auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in01(pi) || !in01(pi1) || !in01(pi2)) throw Error("SimConfig: pi, pi1, pi2 must lie in [0,1]");
    if (!(v > 0.0) || !(u > 0.0)) throw Error("SimConfig: v and u must be positive");
    if (ba_edges < 1) throw Error("SimConfig: ba_edges must be at least 1");
  }
};

struct SimTruth {
  std::vector<std::pair<int, int>> keys;  // (i,j), 1-based, i-major
  std::vector<Adjacency> adjacency;
  std::vector<SymMat> precision;
  std::vector<SymMat> covariance;
  std::vector<Matrix> data;
  int b1 = 0;
  int b2 = 0;
  std::size_t start_edges = 0;
};

/// Erdos-Renyi with pair probability pi, or preferential attachment.
inline Adjacency gen_starting_graph(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const int p = cfg.p;
  Adjacency a(p);
  if (cfg.graph_type == GraphType::erdos_renyi) {
    for (int s = 0; s < p; ++s)
      for (int t = s + 1; t < p; ++t)
        if (rng.uniform() < cfg.pi) a.set(s, t, true);
    return a;
  }
  // Seed clique of k+1 nodes, then each new node attaches to k distinct
  // existing nodes with probability proportional to degree.
  const int k = std::min(cfg.ba_edges, p - 1);
  std::vector<int> stubs;  // node listed once per incident edge end
  for (int s = 0; s <= k; ++s) {
    for (int t = s + 1; t <= k; ++t) {
      a.set(s, t, true);
      stubs.push_back(s);
      stubs.push_back(t);
    }
  }
  for (int node = k + 1; node < p; ++node) {
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < k) {
      const int cand = stubs[rng.uniform_index(stubs.size())];
      if (std::find(targets.begin(), targets.end(), cand) == targets.end()) targets.push_back(cand);
    }
    for (int t : targets) {
      a.set(node, t, true);
      stubs.push_back(node);
      stubs.push_back(t);
    }
  }
  return a;
}

namespace detail {

/// Toggles `b` distinct pairs inside the node range [lo, hi). When the block
/// has fewer than b edges, every existing edge is removed and the remainder
/// are added among absent pairs; otherwise the b pairs are drawn uniformly
/// from all pairs in the block.
inline void perturb_block(Adjacency& a, int lo, int hi, int b, Rng& rng) {
  std::vector<std::pair<int, int>> pairs;
  for (int s = lo; s < hi; ++s)
    for (int t = s + 1; t < hi; ++t) pairs.emplace_back(s, t);
  b = std::min<int>(b, static_cast<int>(pairs.size()));
  if (b <= 0) return;

  std::vector<std::pair<int, int>> present, absent;
  for (const auto& e : pairs) (a(e.first, e.second) ? present : absent).push_back(e);

  auto draw = [&](std::vector<std::pair<int, int>>& pool, int count) {
    // partial Fisher-Yates
    for (int i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.uniform_index(pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      a.toggle(pool[static_cast<std::size_t>(i)].first, pool[static_cast<std::size_t>(i)].second);
    }
  };

  if (static_cast<int>(present.size()) < b) {
    for (const auto& e : present) a.toggle(e.first, e.second);
    draw(absent, b - static_cast<int>(present.size()));
  } else {
    draw(pairs, b);
  }
}

}  // namespace detail

/// Nine adjacency matrices in key order (1,1),(1,2),...,(3,3). The first
/// ceil(p/2) nodes form block 1 (changes with i), the rest block 2 (changes
/// with j); cross-block entries are copied from `start`.
inline std::vector<Adjacency> split_and_perturb(const Adjacency& start, int b1, int b2, Rng& rng) {
  if (b1 < 0 || b2 < 0) throw Error("split_and_perturb: b1, b2 must be non-negative");
  const int p = start.dim();
  const int split = (p + 1) / 2;
  std::array<Adjacency, 3> first{start, start, start}, second{start, start, start};
  for (int k = 1; k < 3; ++k) {
    first[static_cast<std::size_t>(k)] = first[static_cast<std::size_t>(k - 1)];
    detail::perturb_block(first[static_cast<std::size_t>(k)], 0, split, b1, rng);
  }
  for (int k = 1; k < 3; ++k) {
    second[static_cast<std::size_t>(k)] = second[static_cast<std::size_t>(k - 1)];
    detail::perturb_block(second[static_cast<std::size_t>(k)], split, p, b2, rng);
  }
  std::vector<Adjacency> out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Adjacency a = start;
      const auto& f = first[static_cast<std::size_t>(i)];
      const auto& g = second[static_cast<std::size_t>(j)];
      for (int s = 0; s < p; ++s) {
        for (int t = s + 1; t < p; ++t) {
          if (t < split) a.set(s, t, f(s, t));
          else if (s >= split) a.set(s, t, g(s, t));
        }
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

/// Theta = v A + (|kappa| + 0.1 + u) I, kappa the smallest eigenvalue of v A.
inline SymMat adjacency_to_precision(const Adjacency& a, double v, double u) {
  if (!(v > 0.0) || !(u > 0.0)) throw Error("adjacency_to_precision: v and u must be positive");
  const int p = a.dim();
  SymMat scaled(p);
  for (int s = 0; s < p; ++s)
    for (int t = s + 1; t < p; ++t)
      if (a(s, t)) scaled.set(s, t, v);
  const double kappa = sym_eigen(scaled).values[0];
  const double shift = std::abs(kappa) + 0.1 + u;
  Matrix theta = scaled.mat();
  theta.diagonal().array() += shift;
  return SymMat::from_upper(theta);
}

/// n draws from N(0, sigma) as rows: x = L g with L the Cholesky factor.
inline Matrix sample_dataset(const SymMat& sigma, int n, Rng& rng) {
  if (n < 1) throw InvalidDimension("sample_dataset: n must be at least 1");
  const Matrix l = cholesky(sigma);
  const Index p = sigma.dim();
  Matrix x(n, p);
  Vector g(p);
  for (int r = 0; r < n; ++r) {
    for (Index j = 0; j < p; ++j) g[j] = rng.normal();
    x.row(r) = (l.triangularView<Eigen::Lower>() * g).transpose();
  }
  return x;
}

/// Number of changing edges: round(fraction * realized starting edge count).
inline int changing_edges(double fraction, std::size_t start_edges) {
  return static_cast<int>(std::lround(fraction * static_cast<double>(start_edges)));
}

inline SimTruth simulate(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SimTruth out;
  const Adjacency start = gen_starting_graph(cfg, rng);
  out.start_edges = start.edge_count();
  out.b1 = changing_edges(cfg.pi1, out.start_edges);
  out.b2 = changing_edges(cfg.pi2, out.start_edges);
  out.adjacency = split_and_perturb(start, out.b1, out.b2, rng);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) out.keys.emplace_back(i, j);
  for (const auto& a : out.adjacency) {
    out.precision.push_back(adjacency_to_precision(a, cfg.v, cfg.u));
    out.covariance.push_back(invert_pd(out.precision.back()));
  }
  for (const auto& sigma : out.covariance) out.data.push_back(sample_dataset(sigma, cfg.n, rng));
  return out;
}

/// Estimation problem over the nine simulated datasets, keyed ("i","j").
inline CvnProblem problem_from_truth(const SimTruth& truth, const WeightMatrix& weights) {
  CvnProblem prob;
  prob.p = static_cast<int>(truth.data.front().cols());
  prob.m = static_cast<int>(truth.data.size());
  for (int s = 0; s < prob.p; ++s) prob.variables.push_back("X" + std::to_string(s + 1));
  for (std::size_t k = 0; k < truth.data.size(); ++k) {
    prob.graphs.push_back({{std::to_string(truth.keys[k].first), std::to_string(truth.keys[k].second)},
                           static_cast<int>(truth.data[k].rows()),
                           empirical_covariance(truth.data[k])});
  }
  prob.weights = weights;
  prob.validate();
  return prob;
}

}  // namespace cvn
