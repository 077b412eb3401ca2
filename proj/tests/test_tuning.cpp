#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cvn/io.hpp"
#include "cvn/simulate.hpp"
#include "cvn/tuning.hpp"
#include "oracles.hpp"

using namespace cvn;

namespace {

CvnFit identity_fit(int p, int m) {
  CvnFit f;
  f.p = p;
  f.m = m;
  for (int i = 0; i < m; ++i) {
    f.theta.push_back(SymMat::identity(p));
    f.z.push_back(SymMat::identity(p));
    f.adjacency.emplace_back(p);
  }
  f.converged = true;
  return f;
}

CvnProblem identity_problem(int p, int m, int n) {
  CvnProblem prob;
  prob.p = p;
  prob.m = m;
  prob.weights = WeightMatrix::zero(m);
  for (int i = 0; i < m; ++i) prob.graphs.push_back({{std::to_string(i)}, n, SymMat::identity(p)});
  return prob;
}

CvnProblem simulated_problem(int p, int n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.p = p;
  cfg.n = n;
  cfg.pi = 0.3;
  cfg.seed = seed;
  return problem_from_truth(simulate(cfg), weights_grid(3, 3));
}

// Direct re-implementation of the criterion: log det via eigenvalues and the
// non-zero count read entry by entry from the sparsified consensus matrix.
double criterion_by_hand(const CvnFit& f, const CvnProblem& prob, bool bic) {
  double total = 0.0;
  for (int i = 0; i < prob.m; ++i) {
    const auto& g = prob.graphs[i];
    const Matrix s = g.cov.mat(), t = f.theta[i].mat();
    double tr = 0.0;
    for (int a = 0; a < prob.p; ++a)
      for (int b = 0; b < prob.p; ++b) tr += s(a, b) * t(b, a);
    const double nll = 0.5 * g.n * (tr - oracle::spectral_log_det(t));
    int nonzero = 0;
    for (int a = 0; a < prob.p; ++a)
      for (int b = 0; b < prob.p; ++b) nonzero += a == b || std::abs(f.z[i](a, b)) > f.tau;
    total += nll + (bic ? 2.0 * std::log(static_cast<double>(g.n)) : 2.0) * nonzero;
  }
  return total;
}

}  // namespace

TEST(NegLogLikelihood, Examples) {
  EXPECT_NEAR(neg_log_likelihood(SymMat::identity(2), 2, SymMat::identity(2)), 2.0, 1e-15);
  EXPECT_NEAR(neg_log_likelihood(SymMat::identity(1), 2, SymMat::diagonal(Vector::Constant(1, 2.0))),
              2.0 - std::log(2.0), 1e-15);
  EXPECT_NEAR(2.0 - std::log(2.0), 1.306853, 1e-6);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(neg_log_likelihood(SymMat::identity(2), 2, SymMat::from_upper(bad)), NotPositiveDefinite);
}

TEST(NegLogLikelihood, MatchesSpectralLogDet) {
  std::mt19937_64 rng(51);
  for (int rep = 0; rep < 20; ++rep) {
    const int p = 1 + rep % 6, n = 3 + rep;
    const Matrix s = oracle::random_spd(p, rng, 0.1), t = oracle::random_spd(p, rng, 0.5);
    const double ref = 0.5 * n * ((s * t).trace() - oracle::spectral_log_det(t));
    EXPECT_NEAR(neg_log_likelihood(SymMat::from_upper(s), n, SymMat::from_upper(t)), ref, 1e-9 * std::abs(ref));
  }
}

TEST(Criteria, IdentityExamples) {
  CvnFit f = identity_fit(2, 1);
  EXPECT_NEAR(aic(f, identity_problem(2, 1, 2)), 6.0, 1e-15);
  EXPECT_NEAR(bic(f, identity_problem(2, 1, 2)), 2.0 + 2.0 * std::log(2.0) * 2.0, 1e-14);
  EXPECT_NEAR(bic(f, identity_problem(2, 1, 2)), 4.772589, 1e-6);
  // n = 1: no penalty term in BIC.
  EXPECT_NEAR(bic(f, identity_problem(2, 1, 1)), neg_log_likelihood(SymMat::identity(2), 1, SymMat::identity(2)),
              1e-15);
  // One more edge at fixed likelihood adds two entries.
  f.adjacency[0].set(0, 1, true);
  EXPECT_NEAR(aic(f, identity_problem(2, 1, 2)), 10.0, 1e-15);
  EXPECT_THROW(aic(f, identity_problem(3, 1, 2)), DimensionError);
}

TEST(Criteria, BicAtLeastAicWhenLogNAtLeastOne) {
  const auto prob = simulated_problem(6, 30, 5);
  const CvnFit f = fit(prob, gamma_to_lambda({1e-3, 1e-3}, prob.m, prob.p), {});
  EXPECT_GE(bic(f, prob), aic(f, prob));
}

TEST(Criteria, MatchDirectRecomputation) {
  const auto prob = simulated_problem(6, 40, 6);
  const CvnFit f = fit(prob, gamma_to_lambda({5e-4, 1e-3}, prob.m, prob.p), {});
  EXPECT_NEAR(aic(f, prob), criterion_by_hand(f, prob, false), 1e-9 * std::abs(aic(f, prob)));
  EXPECT_NEAR(bic(f, prob), criterion_by_hand(f, prob, true), 1e-9 * std::abs(bic(f, prob)));
}

TEST(Grid, DefaultGridIsGammaProduct) {
  const auto g = default_grid();
  ASSERT_EQ(g.size(), 36u);
  EXPECT_EQ(g.front().gamma1, 1e-5);
  EXPECT_EQ(g.front().gamma2, 1e-5);
  EXPECT_EQ(g[1].gamma2, 5e-5);
  EXPECT_EQ(g.back().gamma1, 5e-3);
  EXPECT_EQ(parse_criterion("BIC"), Criterion::bic);
  EXPECT_THROW(parse_criterion("cv"), Error);
}

TEST(SelectCell, TiesAndFiltering) {
  std::vector<GridCell> cells(3);
  cells[0].gammas = {1e-3, 1e-3};
  cells[1].gammas = {5e-3, 1e-5};
  cells[2].gammas = {5e-3, 1e-4};
  for (auto& c : cells) {
    c.converged = true;
    c.aic = 1.0;
  }
  EXPECT_EQ(select_cell(cells, Criterion::aic), 2u);
  cells[2].converged = false;
  EXPECT_EQ(select_cell(cells, Criterion::aic), 1u);
  cells[0].aic = 0.5;
  EXPECT_EQ(select_cell(cells, Criterion::aic), 0u);
  for (auto& c : cells) c.converged = false;
  EXPECT_THROW(select_cell(cells, Criterion::aic), NoConvergedCell);
}

TEST(GridSearch, SingleCell) {
  const auto prob = simulated_problem(5, 30, 7);
  const auto r = grid_search(prob, {{1e-3, 1e-3}}, Criterion::bic, {});
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_TRUE(r.cells[0].converged);
  EXPECT_EQ(r.cells[0].penalties.lambda1, gamma_to_lambda({1e-3, 1e-3}, prob.m, prob.p).lambda1);
  EXPECT_THROW(grid_search(prob, {}, Criterion::bic, {}), EmptyGrid);
}

TEST(GridSearch, NonConvergedCellIsSkipped) {
  const auto prob = simulated_problem(5, 30, 8);
  FitOptions opts;
  opts.max_iter = 1;
  // With one outer iteration nothing converges.
  EXPECT_THROW(grid_search(prob, {{1e-3, 1e-3}}, Criterion::aic, opts), NoConvergedCell);

  // Cap the iterations at the count the faster cell needs, so that it
  // converges and the slower one does not.
  const std::vector<Gammas> grid = {{1e-5, 1e-5}, {5e-3, 1e-5}};
  const auto free_run = grid_search(prob, grid, Criterion::aic, {});
  const std::size_t fast = free_run.cells[0].iterations < free_run.cells[1].iterations ? 0 : 1;
  const std::size_t slow = 1 - fast;
  ASSERT_LT(free_run.cells[fast].iterations, free_run.cells[slow].iterations);
  opts.max_iter = free_run.cells[fast].iterations;
  const auto r = grid_search(prob, grid, Criterion::aic, opts);
  ASSERT_TRUE(r.cells[fast].converged);
  ASSERT_FALSE(r.cells[slow].converged);
  EXPECT_EQ(r.best, fast);
  EXPECT_EQ(r.converged_count(), 1u);
}

TEST(GridSearch, BestMatchesRecomputationFromSerializedFits) {
  const auto prob = simulated_problem(10, 60, 9);
  std::vector<Gammas> grid = product_grid({1e-4, 1e-3, 5e-3});
  FitOptions opts;
  opts.threads = 2;
  const auto r = grid_search(prob, grid, Criterion::aic, opts);
  std::size_t best = r.cells.size();
  double best_value = INFINITY;
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const auto& cell = r.cells[c];
    ASSERT_TRUE(cell.fit);
    const CvnFit back = fit_from_json(parse_json(fit_to_string(*cell.fit), "fit"));
    EXPECT_EQ(aic(back, prob), cell.aic);
    EXPECT_EQ(bic(back, prob), cell.bic);
    if (!cell.converged) continue;
    const double v = criterion_by_hand(back, prob, false);
    EXPECT_NEAR(v, cell.aic, 1e-9 * std::abs(v));
    if (v < best_value) {
      best_value = v;
      best = c;
    }
  }
  EXPECT_EQ(r.best, best);
}

TEST(GridSearch, ThreadCountDoesNotChangeResults) {
  const auto prob = simulated_problem(6, 30, 10);
  const auto grid = product_grid({1e-4, 1e-3});
  FitOptions one, many;
  many.threads = 3;
  const auto a = grid_search(prob, grid, Criterion::bic, one);
  const auto b = grid_search(prob, grid, Criterion::bic, many);
  EXPECT_EQ(grid_result_csv(a), grid_result_csv(b));
}

TEST(GridSearch, SparsityIsMonotoneInGamma1) {
  for (std::uint64_t seed : {11u, 12u}) {
    const auto prob = simulated_problem(10, 50, seed);
    std::size_t previous = SIZE_MAX;
    for (double g1 : default_gamma_values()) {
      const CvnFit f = fit(prob, gamma_to_lambda({g1, 0.0}, prob.m, prob.p), {});
      ASSERT_TRUE(f.converged);
      std::size_t total = 0;
      for (const auto& a : f.adjacency) total += a.edge_count();
      EXPECT_LE(total, previous) << "gamma1 " << g1 << " seed " << seed;
      previous = total;
    }
  }
}

TEST(GridResultCsv, Layout) {
  const auto prob = simulated_problem(4, 20, 13);
  const auto r = grid_search(prob, {{1e-3, 1e-3}}, Criterion::aic, {});
  const std::string csv = grid_result_csv(r);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header,
            "gamma1,gamma2,lambda1,lambda2,aic,bic,converged,iterations,selected,edges_1,edges_2,edges_3,edges_4,"
            "edges_5,edges_6,edges_7,edges_8,edges_9");
  EXPECT_EQ(csv.substr(header.size() + 1, 6), "0.001,");
}
