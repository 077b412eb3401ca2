// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cvn/interpolate.hpp"
#include "cvn/metrics.hpp"
#include "cvn/simulate.hpp"
#include "cvn/solver.hpp"
#include "cvn/tuning.hpp"
#include "cvn/wflsa.hpp"
#include "oracles.hpp"

using namespace cvn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. Single graph, no smoothing: agreement with a coordinate-descent
// graphical lasso.
void glasso_reduction() {
  const auto t0 = Clock::now();
  SimConfig c;
  c.p = 5;
  c.n = 50;
  c.pi = 0.4;
  c.seed = 101;
  const SimTruth truth = simulate(c);
  CvnProblem prob;
  prob.p = 5;
  prob.m = 1;
  prob.weights = WeightMatrix::zero(1);
  prob.graphs = {{{"1"}, 50, empirical_covariance(truth.data[0])}};
  double worst = 0.0;
  bool same_graph = true;
  std::size_t edges = 0;
  for (double lambda1 : {1.0, 3.0, 6.0}) {
    const CvnFit f = fit(prob, {lambda1, 0.0}, {});
    const auto ref = oracle::glasso(prob.graphs[0].cov.mat(), 2.0 * lambda1 / 50.0);
    worst = std::max(worst, (f.theta[0].mat() - ref.theta).cwiseAbs().maxCoeff());
    for (int s = 0; s < 5; ++s)
      for (int t = s + 1; t < 5; ++t) {
        same_graph = same_graph && f.adjacency[0](s, t) == (ref.theta(s, t) != 0.0);
        edges += ref.theta(s, t) != 0.0;
      }
    same_graph = same_graph && f.converged;
  }
  const double secs = seconds_since(t0);
  report(1, same_graph && worst <= 1e-3 && secs < 10.0,
         "adjacency " + std::string(same_graph ? "identical" : "differs") + " (" + std::to_string(edges) +
             " oracle edges over 3 penalties), max |dTheta| " + fmt("%.3g", worst) + ", " + fmt("%.2f s", secs));
}

// 2. Theta-step stationarity on random instances.
void theta_exactness() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> up(1, 10), un(1, 200);
  std::uniform_real_distribution<double> ur(0.1, 5.0);
  double worst = 0.0;
  bool pd = true;
  for (int rep = 0; rep < 100; ++rep) {
    const int p = up(rng), n = un(rng);
    const double rho = ur(rng);
    const int k = std::max(1, p / 2);  // rank-deficient covariances included
    Matrix x(k, p);
    std::normal_distribution<double> nd;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.cols(); ++j) x(i, j) = nd(rng);
    const SymMat cov = SymMat::from_upper(x.transpose() * x / k);
    const SymMat z = SymMat::from_upper(oracle::random_symmetric(p, rng));
    const SymMat y = SymMat::from_upper(oracle::random_symmetric(p, rng, 0.3));
    const SymMat theta = theta_step(cov, n, z, y, rho);
    const Matrix r = 0.5 * n * (cov.mat() - theta.mat().inverse()) + rho * (theta.mat() - z.mat() + y.mat());
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
    pd = pd && Eigen::SelfAdjointEigenSolver<Matrix>(theta.mat()).eigenvalues()[0] > 0.0;
  }
  report(2, worst < 1e-6 && pd, "max stationarity residual " + fmt("%.3g", worst) + ", all PD: " + (pd ? "yes" : "no"));
}

// 3. Inner solver against a grid scan, soft-thresholding and the fusion limit.
void wflsa_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> uy(-2.0, 2.0), ue(0.0, 1.5);
  std::normal_distribution<double> nd;
  double scan_err = 0.0, soft_err = 0.0, fuse_spread = 0.0, fuse_err = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 1 + rep % 2;
    Vector y(m);
    for (int i = 0; i < m; ++i) y[i] = uy(rng);
    const double e1 = ue(rng), e2 = ue(rng);
    const WeightMatrix w = weights_fgl(m);
    const Vector b = wflsa_solve(wflsa_prepare(w, e1, e2), y);
    const Vector s = oracle::wflsa_grid_scan(y, w.mat(), e1, e2, 2.0 * y.cwiseAbs().maxCoeff(), 1e-4);
    scan_err = std::max(scan_err, (b - s).cwiseAbs().maxCoeff());
  }
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 1 + rep % 9;
    Vector y(m);
    for (int i = 0; i < m; ++i) y[i] = 2.0 * nd(rng);
    const double e1 = ue(rng);
    const Vector b = wflsa_solve(wflsa_prepare(weights_grid(1, m), e1, 0.0), y);
    for (int i = 0; i < m; ++i) {
      const double ref = (y[i] > 0 ? 1.0 : -1.0) * std::max(std::abs(y[i]) - e1, 0.0);
      soft_err = std::max(soft_err, std::abs(b[i] - ref));
    }
  }
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 2 + rep % 8;
    Vector y(m);
    for (int i = 0; i < m; ++i) y[i] = nd(rng);
    const double e1 = 0.5 * ue(rng);
    const Vector b = wflsa_solve(wflsa_prepare(weights_fgl(m), e1, 10.0 * y.cwiseAbs().maxCoeff()), y);
    fuse_spread = std::max(fuse_spread, b.maxCoeff() - b.minCoeff());
    const double mean = y.mean();
    auto collapsed = [&](double c) { return 0.5 * m * (c - mean) * (c - mean) + m * e1 * std::abs(c); };
    const double c = oracle::scan_minimize(collapsed, -3.0, 3.0, 1e-4, 1e-8);
    fuse_err = std::max(fuse_err, (b.array() - c).abs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  report(3, scan_err <= 2e-4 && soft_err <= 1e-6 && fuse_spread <= 1e-6 && fuse_err <= 1e-6 && secs < 60.0,
         "grid-scan err " + fmt("%.3g", scan_err) + ", soft-threshold err " + fmt("%.3g", soft_err) +
             ", fusion spread " + fmt("%.3g", fuse_spread) + ", fusion vs collapsed " + fmt("%.3g", fuse_err) + ", " +
             fmt("%.2f s", secs));
}

// 4. Dominating smoothing penalty gives nine identical graphs.
void full_fusion() {
  SimConfig c;
  c.p = 20;
  c.n = 100;
  c.pi = 0.1;
  c.seed = 104;
  const CvnProblem prob = problem_from_truth(simulate(c), weights_fgl(9));
  const double lambda1 = gamma_to_lambda({1e-3, 0.0}, prob.m, prob.p).lambda1;
  const CvnFit f = fit(prob, {lambda1, 1e4}, {});
  const double worst = hamming_matrix(f.adjacency).maxCoeff();
  report(4, worst == 0.0,
         "max pairwise Hamming " + fmt("%g", worst) + ", edges per graph " + std::to_string(f.adjacency[0].edge_count()) +
             ", converged " + (f.converged ? "yes" : "no"));
}

struct RunSummary {
  double oracle = 0.0;
  bool dominance = true;
  std::size_t converged = 0;
  std::size_t cells = 0;
  std::size_t reported = 0;
};

RunSummary tuning_run(const SimTruth& truth, const WeightMatrix& w) {
  const CvnProblem prob = problem_from_truth(truth, w);
  const GridResult r = grid_search(prob, default_grid(), Criterion::aic, {});
  std::vector<GridEstimate> est;
  for (const auto& cell : r.cells)
    est.push_back({cell.gammas.gamma1, cell.gammas.gamma2,
                   cell.fit ? cell.fit->adjacency : std::vector<Adjacency>(9, Adjacency(prob.p))});
  RunSummary s;
  s.oracle = oracle_f1(truth.adjacency, est).f1;
  for (Criterion crit : {Criterion::aic, Criterion::bic}) {
    const std::size_t sel = select_cell(r.cells, crit);
    const double f1 = precision_recall_f1(confusion(truth.adjacency, r.cells[sel].fit->adjacency)).f1;
    s.dominance = s.dominance && f1 <= s.oracle;
  }
  s.converged = r.converged_count();
  s.cells = r.cells.size();
  const std::string csv = grid_result_csv(r);
  s.reported = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
  return s;
}

// 5, 6 and 9 share the same tuning runs.
void smoothing_benefit() {
  const auto t0 = Clock::now();
  double grid_sum = 0.0, zero_sum = 0.0;
  bool dominance = true;
  std::size_t conv = 0, cells = 0, reported = 0;
  double worst_fraction = 1.0;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    SimConfig c;
    c.p = 20;
    c.n = 100;
    c.pi = 0.1;
    c.pi1 = c.pi2 = 0.1;
    c.seed = static_cast<std::uint64_t>(1000 + seed);
    const SimTruth truth = simulate(c);
    for (int k = 0; k < 2; ++k) {
      const RunSummary s = tuning_run(truth, k == 0 ? weights_grid(3, 3) : WeightMatrix::zero(9));
      (k == 0 ? grid_sum : zero_sum) += s.oracle;
      dominance = dominance && s.dominance;
      conv += s.converged;
      cells += s.cells;
      reported += s.reported;
      worst_fraction = std::min(worst_fraction, double(s.converged) / double(s.cells));
    }
  }
  const double secs = seconds_since(t0);
  const double grid_mean = grid_sum / seeds, zero_mean = zero_sum / seeds;
  report(5, grid_mean >= zero_mean - 0.02 && secs < 1800.0,
         "mean oracle F1 grid " + fmt("%.4f", grid_mean) + " vs zero " + fmt("%.4f", zero_mean) + " over " +
             std::to_string(seeds) + " seeds, " + fmt("%.0f s", secs));
  report(6, dominance, "selected-cell F1 <= oracle F1 on all " + std::to_string(2 * seeds) + " grids x {AIC, BIC}");
  report(9, worst_fraction >= 0.9 && reported == cells,
         "converged fraction on the worst grid " + fmt("%.3f", worst_fraction) + " (each grid needs >= 0.90), " +
             std::to_string(conv) + "/" + std::to_string(cells) + " cells converged overall, " +
             std::to_string(reported) + " rows reported");
}

// 7. Interpolation search and convexity.
void interpolation() {
  std::mt19937_64 rng(107);
  std::uniform_int_distribution<int> um(1, 6);
  std::uniform_real_distribution<double> uy(-2.0, 2.0), uw(0.0, 1.0), ul(0.0, 3.0), ux(-4.0, 4.0);
  auto draw = [&](InterpolationMode mode, std::vector<double>& y) {
    InterpolationSpec s;
    s.mode = mode;
    y.clear();
    const int m = um(rng);
    for (int i = 0; i < m; ++i) {
      y.push_back(uy(rng));
      s.omegas.push_back(uw(rng));
    }
    s.omegas[0] += 0.1;
    s.lambda1 = ul(rng);
    s.lambda2 = ul(rng);
    return s;
  };
  auto objective = [](double x, const std::vector<double>& y, const InterpolationSpec& s) {
    double f = s.lambda1 * std::abs(x);
    for (std::size_t i = 0; i < y.size(); ++i) f += s.lambda2 * s.omegas[i] * std::abs(y[i] - x);
    return f;
  };
  double gap = 0.0;
  std::vector<double> y;
  for (int rep = 0; rep < 100; ++rep) {
    const InterpolationSpec s = draw(InterpolationMode::sum, y);
    const double x = interpolate_edge(y, s);
    double scan = INFINITY;
    for (long k = -600000; k <= 600000; ++k) scan = std::min(scan, objective(1e-5 * static_cast<double>(k), y, s));
    gap = std::max(gap, std::abs(objective(x, y, s) - scan));
  }
  double convexity = -INFINITY;
  for (int rep = 0; rep < 100; ++rep) {
    const InterpolationSpec s = draw(rep % 2 ? InterpolationMode::sum : InterpolationMode::aggregate, y);
    const double x1 = ux(rng), x2 = ux(rng), a = uw(rng);
    auto f = [&](double x) { return interpolation_objective(x, y, s); };
    convexity = std::max(convexity, f(a * x1 + (1 - a) * x2) - (a * f(x1) + (1 - a) * f(x2)));
  }
  report(7, gap <= 1e-4 && convexity <= 1e-12,
         "max objective gap to 1e-5 scan " + fmt("%.3g", gap) + ", max convexity violation " + fmt("%.3g", convexity));
}

// 8. Simulator invariants.
void simulator() {
  double worst_eig = 0.0;
  bool blocks = true, reproducible = true;
  for (int seed = 1; seed <= 10; ++seed) {
    SimConfig c;
    c.p = 21;
    c.n = 10;
    c.pi = 0.2;
    c.pi1 = 0.2;
    c.pi2 = 0.1;
    c.graph_type = seed % 2 ? GraphType::erdos_renyi : GraphType::barabasi_albert;
    c.seed = static_cast<std::uint64_t>(seed);
    const SimTruth t = simulate(c), again = simulate(c);
    const int split = 11;
    for (std::size_t k = 0; k < 9; ++k) {
      const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(t.precision[k].mat()).eigenvalues()[0];
      worst_eig = std::max(worst_eig, std::abs(lo - 0.2));
      reproducible = reproducible && t.adjacency[k] == again.adjacency[k] && t.precision[k] == again.precision[k] &&
                     t.data[k] == again.data[k];
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Adjacency& a = t.adjacency[static_cast<std::size_t>(3 * i + j)];
        for (int s = 0; s < c.p; ++s)
          for (int r = s + 1; r < c.p; ++r) {
            if (s < split && r >= split) blocks = blocks && a(s, r) == t.adjacency[0](s, r);
            if (i + 1 < 3) {
              const Adjacency& b = t.adjacency[static_cast<std::size_t>(3 * (i + 1) + j)];
              if (a(s, r) != b(s, r)) blocks = blocks && r < split;
            }
            if (j + 1 < 3) {
              const Adjacency& b = t.adjacency[static_cast<std::size_t>(3 * i + j + 1)];
              if (a(s, r) != b(s, r)) blocks = blocks && s >= split;
            }
          }
        if (i + 1 < 3)
          blocks = blocks && hamming(a, t.adjacency[static_cast<std::size_t>(3 * (i + 1) + j)]) ==
                                 static_cast<std::size_t>(t.b1);
        if (j + 1 < 3)
          blocks = blocks &&
                   hamming(a, t.adjacency[static_cast<std::size_t>(3 * i + j + 1)]) == static_cast<std::size_t>(t.b2);
      }
  }
  report(8, worst_eig <= 1e-8 && blocks && reproducible,
         "max |lambda_min - 0.2| " + fmt("%.3g", worst_eig) + ", block discipline " + (blocks ? "exact" : "violated") +
             ", reproducible " + (reproducible ? "yes" : "no"));
}

// 10. Scaling of run time with p and m at a fixed iteration count.
void complexity() {
  FitOptions opts;
  opts.eps = 0.0;  // never stops early: every run does max_iter iterations
  opts.max_iter = 60;
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  auto problem = [](int p, int m, const WeightMatrix& w, std::uint64_t seed) {
    SimConfig c;
    c.p = p;
    c.n = 100;
    c.pi = 0.1;
    c.seed = seed;
    const SimTruth t = simulate(c);
    CvnProblem prob = problem_from_truth(t, weights_grid(3, 3));
    prob.graphs.resize(static_cast<std::size_t>(m));
    prob.m = m;
    prob.weights = w;
    return prob;
  };
  auto fit_time = [&](const CvnProblem& prob, bool z_only) {
    std::vector<double> v;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      const CvnFit f = fit(prob, gamma_to_lambda({1e-3, 1e-3}, prob.m, prob.p), opts);
      v.push_back(z_only ? f.z_step_seconds : seconds_since(t0));
    }
    return median(v);
  };
  const double t20 = fit_time(problem(20, 9, weights_grid(3, 3), 110), false);
  const double t40 = fit_time(problem(40, 9, weights_grid(3, 3), 110), false);
  const double z4 = fit_time(problem(20, 4, weights_fgl(4), 111), true);
  const double z8 = fit_time(problem(20, 8, weights_fgl(8), 111), true);
  report(10, t40 / t20 < 12.0 && z8 / z4 < 6.0,
         "p 20->40 fit time x" + fmt("%.2f", t40 / t20) + ", m 4->8 Z-step time x" + fmt("%.2f", z8 / z4) + " (" +
             std::to_string(opts.max_iter) + " iterations each)");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks = {glasso_reduction, theta_exactness, wflsa_oracles, full_fusion,
                                                     interpolation,    simulator,       complexity,    smoothing_benefit};
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion: unexpected exception: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
