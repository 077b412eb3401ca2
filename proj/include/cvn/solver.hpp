#pragma once

// ADMM for the covariate-varying network estimator
//
//   min sum_i l_i(Theta_i) + lambda1 sum_i ||Theta_i||_1,off
//                          + lambda2 sum_{i<j} w_ij ||Theta_i - Theta_j||_1,off
//
// with l_i(Theta) = (n_i / 2) [trace(S_i Theta) - log det Theta], using the
// consensus split Theta_i = Z_i and scaled duals Y_i.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvn/adjacency.hpp"
#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/model.hpp"
#include "cvn/parallel.hpp"
#include "cvn/wflsa.hpp"

namespace cvn {

struct FitOptions {
  double rho = 1.0;
  double eps = 1e-5;
  int max_iter = 1000;
  bool warmstart = false;
  double adjacency_tol = 1e-6;
  int threads = 1;
  // Verify positive definiteness and Theta-step stationarity every iteration.
  bool check_invariants = false;
  WflsaOptions inner;
};

struct AdmmState {
  std::vector<SymMat> theta;
  std::vector<SymMat> z;
  std::vector<SymMat> y;
  int iteration = 0;
  // Inner solver split variables per off-diagonal pair, in edge_pairs order.
  std::vector<WflsaWarmStart> edge_warm;
};

struct CvnFit {
  int p = 0;
  int m = 0;
  std::vector<GraphKey> keys;
  std::vector<int> n;
  std::vector<std::string> variables;
  Penalties penalties;
  std::optional<Gammas> gammas;  // set when the fit was requested in gamma units
  double rho = 1.0;
  double eps = 1e-5;
  double tau = 1e-6;
  std::vector<SymMat> theta;
  std::vector<SymMat> z;
  std::vector<Adjacency> adjacency;
  int iterations = 0;
  bool converged = false;
  double final_relative_change = 0.0;

  // Diagnostics, not serialized.
  long long inner_iterations = 0;
  double theta_step_seconds = 0.0;
  double z_step_seconds = 0.0;
};

/// Upper-triangle pairs (s < t), row-major.
inline std::vector<std::pair<int, int>> edge_pairs(int p) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p > 0 ? p - 1 : 0) / 2);
  for (int s = 0; s < p; ++s)
    for (int t = s + 1; t < p; ++t) out.emplace_back(s, t);
  return out;
}

/// a_st = 1 iff s != t and |z_st| > tau.
inline Adjacency extract_adjacency(const SymMat& z, double tau) {
  if (!(tau >= 0.0)) throw Error("extract_adjacency: tau must be non-negative");
  const int p = static_cast<int>(z.dim());
  Adjacency a(p);
  for (int s = 0; s < p; ++s)
    for (int t = s + 1; t < p; ++t)
      if (std::abs(z(s, t)) > tau) a.set(s, t, true);
  return a;
}

/// sum_i ||next_i - prev_i||_1 / sum_i ||prev_i||_1 over all entries.
inline double relative_change(const std::vector<SymMat>& prev, const std::vector<SymMat>& next) {
  if (prev.size() != next.size()) throw DimensionError("relative_change: list lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i].dim() != next[i].dim()) throw DimensionError("relative_change: shape mismatch");
    num += entrywise_l1(next[i].mat() - prev[i].mat());
    den += entrywise_l1(prev[i].mat());
  }
  if (!(den > 0.0)) throw DegenerateState("relative_change: previous iterate is zero");
  return num / den;
}

/// || (n/2)(S - Theta^{-1}) + rho (Theta - Z + Y) ||_inf, the first-order
/// condition of the Theta-step. Uses an independent Cholesky inverse.
inline double theta_stationarity_residual(const SymMat& cov, int n, const SymMat& theta,
                                          const SymMat& z, const SymMat& y, double rho) {
  const SymMat inv = invert_pd(theta);
  const Matrix r = 0.5 * n * (cov.mat() - inv.mat()) + rho * (theta.mat() - z.mat() + y.mat());
  return r.cwiseAbs().maxCoeff();
}

/// Exact minimizer of (n/2)[tr(S T) - log det T] + (rho/2)||T - Z + Y||_F^2.
/// Decompose S - (2 rho / n)(Z - Y) = Q diag(g) Q^T and map each eigenvalue to
/// the positive root of (2 rho / n) t^2 + g t - 1 = 0.
inline SymMat theta_step(const SymMat& cov, int n, const SymMat& z, const SymMat& y, double rho) {
  const double c = 2.0 * rho / static_cast<double>(n);
  const SymMat a = SymMat::from_upper(cov.mat() - c * (z.mat() - y.mat()));
  const EigenPair eig = sym_eigen(a);
  Vector t(eig.values.size());
  for (Index j = 0; j < t.size(); ++j) {
    const double g = eig.values[j];
    const double root = std::sqrt(g * g + 4.0 * c);
    // 2 / (root + g) == (root - g) / (2c), without cancellation for g > 0.
    t[j] = g >= 0.0 ? 2.0 / (root + g) : (root - g) / (2.0 * c);
  }
  return SymMat::from_upper(eig.vectors * t.asDiagonal() * eig.vectors.transpose());
}

inline std::vector<SymMat> theta_update(const AdmmState& state, const CvnProblem& problem, double rho,
                                        int threads = 1) {
  if (!(rho > 0.0)) throw Error("theta_update: rho must be positive");
  std::vector<SymMat> out(static_cast<std::size_t>(problem.m));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto& g = problem.graphs[i];
    out[i] = theta_step(g.cov, g.n, state.z[i], state.y[i], rho);
  });
  return out;
}

/// Diagonal: z_ss = theta_ss + y_ss. Off-diagonal: one wFLSA per pair over the
/// m graphs. Inner warm starts in `state.edge_warm` are updated in place.
inline std::vector<SymMat> z_update(AdmmState& state, const CvnProblem& problem, const WflsaWorkspace& ws,
                                    int threads = 1, long long* inner_iterations = nullptr) {
  const int m = problem.m;
  const int p = problem.p;
  if (ws.dim() != m) throw DimensionError("z_update: workspace dimension does not match m");
  const auto pairs = edge_pairs(p);
  if (state.edge_warm.size() != pairs.size()) state.edge_warm.assign(pairs.size(), {});

  std::vector<SymMat> out(static_cast<std::size_t>(m), SymMat(p));
  std::vector<Vector> solved(pairs.size());
  std::vector<int> iters(pairs.size(), 0);
  parallel_for(pairs.size(), threads, [&](std::size_t e) {
    const auto [s, t] = pairs[e];
    Vector target(m);
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      target[i] = state.theta[ii](s, t) + state.y[ii](s, t);
    }
    try {
      auto res = wflsa_solve_detailed(ws, target, &state.edge_warm[e]);
      solved[e] = std::move(res.beta);
      iters[e] = res.iterations;
    } catch (const ConvergenceFailure& err) {
      throw err.with_edge(s, t);
    }
  });
  for (int i = 0; i < m; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    for (int s = 0; s < p; ++s) out[ii].set(s, s, state.theta[ii](s, s) + state.y[ii](s, s));
  }
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [s, t] = pairs[e];
    for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)].set(s, t, solved[e][i]);
  }
  if (inner_iterations != nullptr)
    for (int it : iters) *inner_iterations += it;
  return out;
}

/// Y_i <- Y_i + Theta_i - Z_i.
inline std::vector<SymMat> y_update(const AdmmState& state) {
  std::vector<SymMat> out;
  out.reserve(state.y.size());
  for (std::size_t i = 0; i < state.y.size(); ++i)
    out.push_back(SymMat::from_upper(state.y[i].mat() + state.theta[i].mat() - state.z[i].mat()));
  return out;
}

CvnFit fit(const CvnProblem& problem, const Penalties& pen, const FitOptions& opts);

/// Theta_i(1) = diag(S_i)^{-1}, Z = Y = 0. With opts.warmstart, Theta_i(1) is
/// the single-graph fit of graph i at (lambda1, 0).
inline AdmmState initialize(const CvnProblem& problem, const FitOptions& opts, const Penalties& pen = {}) {
  problem.validate();
  AdmmState st;
  for (const auto& g : problem.graphs) {
    Vector d(problem.p);
    for (int s = 0; s < problem.p; ++s) {
      const double v = g.cov(s, s);
      if (!(v > 1e-12)) {
        throw DegenerateVariable(problem.variable_name(s),
                                 "variable '" + problem.variable_name(s) +
                                     "' has zero empirical variance in a graph");
      }
      d[s] = 1.0 / v;
    }
    st.theta.push_back(SymMat::diagonal(d));
    st.z.emplace_back(problem.p);
    st.y.emplace_back(problem.p);
  }
  if (opts.warmstart) {
    FitOptions single = opts;
    single.warmstart = false;
    for (int i = 0; i < problem.m; ++i) {
      CvnProblem one;
      one.p = problem.p;
      one.m = 1;
      one.variables = problem.variables;
      one.graphs = {problem.graphs[static_cast<std::size_t>(i)]};
      one.weights = WeightMatrix::zero(1);
      st.theta[static_cast<std::size_t>(i)] = fit(one, {pen.lambda1, 0.0}, single).theta.front();
    }
  }
  return st;
}

inline CvnFit fit(const CvnProblem& problem, const Penalties& pen, const FitOptions& opts) {
  problem.validate();
  if (!std::isfinite(pen.lambda1) || pen.lambda1 < 0.0 || !std::isfinite(pen.lambda2) || pen.lambda2 < 0.0)
    throw Error("fit: penalties must be finite and non-negative");
  if (!(opts.rho > 0.0) || !(opts.eps >= 0.0) || opts.max_iter < 1 || !(opts.adjacency_tol >= 0.0))
    throw Error("fit: invalid options");

  using clock = std::chrono::steady_clock;
  AdmmState st = initialize(problem, opts, pen);
  const WflsaWorkspace ws =
      wflsa_prepare(problem.weights, pen.lambda1 / opts.rho, pen.lambda2 / opts.rho, opts.inner);

  CvnFit out;
  double rc = 0.0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    auto t0 = clock::now();
    std::vector<SymMat> next = theta_update(st, problem, opts.rho, opts.threads);
    out.theta_step_seconds += std::chrono::duration<double>(clock::now() - t0).count();
    if (opts.check_invariants) {
      for (int i = 0; i < problem.m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const auto& g = problem.graphs[ii];
        const double r = theta_stationarity_residual(g.cov, g.n, next[ii], st.z[ii], st.y[ii], opts.rho);
        if (!(r < 1e-6)) throw NumericError("fit: Theta-step stationarity residual " + std::to_string(r));
      }
    }
    rc = relative_change(st.theta, next);
    st.theta = std::move(next);

    t0 = clock::now();
    st.z = z_update(st, problem, ws, opts.threads, &out.inner_iterations);
    out.z_step_seconds += std::chrono::duration<double>(clock::now() - t0).count();
    st.y = y_update(st);
    st.iteration = k;
    if (rc < opts.eps) {
      out.converged = true;
      break;
    }
  }

  out.p = problem.p;
  out.m = problem.m;
  out.variables = problem.variables;
  for (const auto& g : problem.graphs) {
    out.keys.push_back(g.key);
    out.n.push_back(g.n);
  }
  out.penalties = pen;
  out.rho = opts.rho;
  out.eps = opts.eps;
  out.tau = opts.adjacency_tol;
  out.iterations = st.iteration;
  out.final_relative_change = rc;
  out.theta = std::move(st.theta);
  out.z = std::move(st.z);
  for (const auto& z : out.z) out.adjacency.push_back(extract_adjacency(z, out.tau));
  return out;
}

}  // namespace cvn
