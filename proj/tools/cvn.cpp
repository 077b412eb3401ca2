// cvn: command-line front end.
//
// Exit codes: 0 success, 1 I/O or validation error, 2 usage error,
// 3 solver non-convergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvn/errors.hpp"
#include "cvn/interpolate.hpp"
#include "cvn/io.hpp"
#include "cvn/metrics.hpp"
#include "cvn/model.hpp"
#include "cvn/simulate.hpp"
#include "cvn/solver.hpp"
#include "cvn/tuning.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;
constexpr int kNotConverged = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  const auto items = split_list(s);
  for (std::size_t i = 0; i < items.size(); ++i) out.push_back(cvn::parse_double(items[i], i, what));
  if (out.empty()) throw cvn::ParseError(what + ": empty list");
  return out;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  cvn::write_file(path, content);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw cvn::IoError("cannot create output directory '" + dir.string() + "'");
}

// Options shared by fit and tune.
struct ProblemArgs {
  std::string data;
  std::string covariates;
  std::string weights;
  bool standardize = false;

  void add(CLI::App* app) {
    app->add_option("--data", data, "Long-format CSV with a header row")->required();
    app->add_option("--covariates", covariates, "Comma-separated covariate column names")->required();
    app->add_option("--weights", weights, "Weight matrix: CSV path, tvgl:T, fgl:M, grid:RxC or zero:M")
        ->required();
    app->add_flag("--standardize", standardize, "Center and scale each variable within each group");
  }

  cvn::CvnProblem load() const {
    const auto covs = split_list(covariates);
    if (covs.empty()) throw UsageError("--covariates must name at least one column");
    cvn::LongTable table = cvn::read_long_table(data);
    if (standardize) table = cvn::standardize_within_groups(table, covs);
    cvn::CvnProblem prob = cvn::build_problem(table, covs);
    cvn::WeightMatrix w = cvn::load_weights(weights);
    if (w.m() != prob.m)
      throw cvn::DimensionError("weight matrix is " + std::to_string(w.m()) + "x" + std::to_string(w.m()) +
                                " but the data has m=" + std::to_string(prob.m) + " graphs");
    prob.weights = std::move(w);
    prob.validate();
    return prob;
  }
};

struct SolverArgs {
  double rho = 1.0;
  double eps = 1e-5;
  int max_iter = 1000;
  bool warmstart = false;
  double tau = 1e-6;
  int threads = 1;

  void add(CLI::App* app) {
    app->add_option("--rho", rho, "ADMM penalty parameter")->capture_default_str();
    app->add_option("--eps", eps, "Relative-change stopping tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Maximum ADMM iterations")->capture_default_str();
    app->add_flag("--warmstart", warmstart, "Start from independent single-graph fits");
    app->add_option("--tau", tau, "Edge detection threshold on |z|")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  }

  cvn::FitOptions options() const {
    cvn::FitOptions o;
    o.rho = rho;
    o.eps = eps;
    o.max_iter = max_iter;
    o.warmstart = warmstart;
    o.adjacency_tol = tau;
    o.threads = threads;
    return o;
  }
};

int cmd_simulate(const cvn::SimConfig& cfg, const std::string& out_dir) {
  const cvn::SimTruth truth = cvn::simulate(cfg);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  cvn::write_file(dir / "data.csv", cvn::sim_data_csv(truth));
  cvn::write_file(dir / "truth_adjacency.json", cvn::canonical_json(cvn::truth_adjacency_to_json(truth)));
  cvn::write_file(dir / "truth_precision.json", cvn::canonical_json(cvn::truth_precision_to_json(truth)));
  cvn::write_file(dir / "config.json", cvn::canonical_json(cvn::sim_config_to_json(cfg, truth)));
  return kOk;
}

struct PenaltyArgs {
  std::optional<double> lambda1, lambda2, gamma1, gamma2;

  void add(CLI::App* app) {
    auto* l1 = app->add_option("--lambda1", lambda1, "Sparsity penalty");
    auto* l2 = app->add_option("--lambda2", lambda2, "Smoothness penalty");
    auto* g1 = app->add_option("--gamma1", gamma1, "Per-edge sparsity penalty");
    auto* g2 = app->add_option("--gamma2", gamma2, "Per-edge smoothness penalty");
    for (auto* l : {l1, l2})
      for (auto* g : {g1, g2}) l->excludes(g);
  }

  // Returns the penalties and, in gamma units, the gammas. A missing partner
  // defaults to 0.
  std::pair<cvn::Penalties, std::optional<cvn::Gammas>> resolve(int m, int p) const {
    if (lambda1 || lambda2) return {{lambda1.value_or(0.0), lambda2.value_or(0.0)}, std::nullopt};
    if (gamma1 || gamma2) {
      const cvn::Gammas g{gamma1.value_or(0.0), gamma2.value_or(0.0)};
      return {cvn::gamma_to_lambda(g, m, p), g};
    }
    throw UsageError("give --lambda1/--lambda2 or --gamma1/--gamma2");
  }
};

int cmd_fit(const ProblemArgs& pa, const PenaltyArgs& pen, const SolverArgs& sa, const std::string& out) {
  const cvn::CvnProblem prob = pa.load();
  const auto [lambdas, gammas] = pen.resolve(prob.m, prob.p);
  cvn::CvnFit f = cvn::fit(prob, lambdas, sa.options());
  f.gammas = gammas;
  cvn::write_file(out, cvn::fit_to_string(f));
  if (!f.converged) {
    std::cerr << "cvn fit: no convergence after " << f.iterations << " iterations (relative change "
              << f.final_relative_change << ")\n";
    return kNotConverged;
  }
  return kOk;
}

int cmd_tune(const ProblemArgs& pa, const SolverArgs& sa, const std::string& criterion, const std::string& grid_spec,
             const std::string& truth_path, const std::string& out_dir) {
  const cvn::CvnProblem prob = pa.load();
  const auto crit = cvn::parse_criterion(criterion);
  const auto grid = grid_spec == "default" ? cvn::default_grid()
                                           : cvn::product_grid(parse_doubles(grid_spec, "--grid"));
  std::optional<cvn::KeyedGraphs> truth;
  if (!truth_path.empty()) {
    truth = cvn::truth_adjacency_from_json(cvn::parse_json(cvn::read_file(truth_path), truth_path));
    if (truth->keys.size() != static_cast<std::size_t>(prob.m))
      throw cvn::DimensionError("truth has " + std::to_string(truth->keys.size()) + " graphs, data has m=" +
                                std::to_string(prob.m));
  }
  const fs::path dir(out_dir);
  ensure_dir(dir);

  cvn::GridResult result;
  try {
    result = cvn::grid_search(prob, grid, crit, sa.options());
  } catch (const cvn::NoConvergedCell& e) {
    std::cerr << "cvn tune: " << e.what() << '\n';
    return kNotConverged;
  }
  cvn::write_file(dir / "grid.csv", cvn::grid_result_csv(result));
  cvn::write_file(dir / "best_fit.json", cvn::fit_to_string(*result.cells[result.best].fit));

  for (const auto& cell : result.cells) {
    if (!cell.converged)
      std::cerr << "cvn tune: cell gamma1=" << cell.gammas.gamma1 << " gamma2=" << cell.gammas.gamma2
                << " did not converge" << (cell.error.empty() ? "" : ": " + cell.error) << '\n';
  }

  if (truth) {
    std::vector<cvn::GridEstimate> estimates;
    std::vector<std::size_t> cell_of;
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
      if (!result.cells[c].fit) continue;
      estimates.push_back({result.cells[c].gammas.gamma1, result.cells[c].gammas.gamma2, result.cells[c].fit->adjacency});
      cell_of.push_back(c);
    }
    const auto oracle = cvn::oracle_f1(truth->graphs, estimates);
    std::ostringstream os;
    os << "gamma1,gamma2,converged,tp,fp,fn,precision,recall,f1,selected,oracle\n";
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const auto& cell = result.cells[cell_of[k]];
      const auto c = cvn::confusion(truth->graphs, estimates[k].graphs);
      const auto pr = cvn::precision_recall_f1(c);
      os << cvn::format_double(cell.gammas.gamma1) << ',' << cvn::format_double(cell.gammas.gamma2) << ','
         << (cell.converged ? 1 : 0) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
         << cvn::format_double(pr.precision) << ',' << cvn::format_double(pr.recall) << ','
         << cvn::format_double(pr.f1) << ',' << (cell_of[k] == result.best ? 1 : 0) << ','
         << (k == oracle.cell ? 1 : 0) << '\n';
    }
    cvn::write_file(dir / "f1.csv", os.str());
  }
  return kOk;
}

void check_keys(const std::vector<cvn::GraphKey>& fit_keys, const std::vector<cvn::GraphKey>& truth_keys) {
  if (fit_keys != truth_keys)
    throw cvn::DimensionError("fit and truth graph keys differ (" + std::to_string(fit_keys.size()) + " vs " +
                              std::to_string(truth_keys.size()) + " graphs)");
}

int cmd_metrics(const std::string& fit_path, const std::string& truth_path, const std::string& out) {
  const cvn::CvnFit f = cvn::read_fit(fit_path);
  const auto truth = cvn::truth_adjacency_from_json(cvn::parse_json(cvn::read_file(truth_path), truth_path));
  check_keys(f.keys, truth.keys);
  const auto c = cvn::confusion(truth.graphs, f.adjacency);
  const auto pr = cvn::precision_recall_f1(c);
  std::ostringstream os;
  os << "tp,fp,fn,precision,recall,f1\n"
     << c.tp << ',' << c.fp << ',' << c.fn << ',' << cvn::format_double(pr.precision) << ','
     << cvn::format_double(pr.recall) << ',' << cvn::format_double(pr.f1) << '\n';
  emit(out, os.str());
  return kOk;
}

int cmd_interpolate(const std::string& fit_path, const std::string& omegas, double lambda1, double lambda2,
                    const std::string& mode, std::optional<double> tau, const std::string& out) {
  const cvn::CvnFit f = cvn::read_fit(fit_path);
  cvn::InterpolationSpec spec;
  spec.omegas = parse_doubles(omegas, "--omegas");
  spec.lambda1 = lambda1;
  spec.lambda2 = lambda2;
  spec.mode = cvn::parse_interpolation_mode(mode);
  const cvn::Adjacency a = cvn::interpolate_graph(f, spec, tau.value_or(f.tau));
  emit(out, cvn::canonical_json(cvn::adjacency_to_json(a)));
  return kOk;
}

int cmd_hamming(const std::string& fit_path, const std::string& out) {
  const cvn::CvnFit f = cvn::read_fit(fit_path);
  emit(out, cvn::matrix_csv(cvn::hamming_matrix(f.adjacency)));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-varying Gaussian graphical networks"};
  app.require_subcommand(1);

  // simulate
  cvn::SimConfig sim;
  std::string sim_out, graph_type = "er";
  auto* s = app.add_subcommand("simulate", "Generate a 3x3 grid of graphs and Gaussian data");
  s->add_option("--p", sim.p, "Number of variables")->capture_default_str();
  s->add_option("--n", sim.n, "Observations per graph")->capture_default_str();
  s->add_option("--graph-type", graph_type, "Starting graph: er or ba")->capture_default_str();
  s->add_option("--pi", sim.pi, "Edge probability of the starting graph")->capture_default_str();
  s->add_option("--pi1", sim.pi1, "Fraction of edges changing along the first covariate")->capture_default_str();
  s->add_option("--pi2", sim.pi2, "Fraction of edges changing along the second covariate")->capture_default_str();
  s->add_option("--v", sim.v, "Off-diagonal precision value")->capture_default_str();
  s->add_option("--u", sim.u, "Diagonal boost")->capture_default_str();
  s->add_option("--ba-edges", sim.ba_edges, "Edges per new node in the ba graph")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  s->add_option("--out", sim_out, "Output directory")->required();

  // fit
  ProblemArgs fit_problem;
  PenaltyArgs fit_pen;
  SolverArgs fit_solver;
  std::string fit_out;
  auto* f = app.add_subcommand("fit", "Fit a model at one penalty setting");
  fit_problem.add(f);
  fit_pen.add(f);
  fit_solver.add(f);
  f->add_option("--out", fit_out, "Output fit JSON")->required();

  // tune
  ProblemArgs tune_problem;
  SolverArgs tune_solver;
  std::string criterion = "bic", grid = "default", tune_truth, tune_out;
  auto* t = app.add_subcommand("tune", "Fit a (gamma1, gamma2) grid and select by AIC or BIC");
  tune_problem.add(t);
  tune_solver.add(t);
  t->add_option("--criterion", criterion, "aic or bic")->capture_default_str();
  t->add_option("--grid", grid, "'default' or comma-separated gamma values (used for both axes)")
      ->capture_default_str();
  t->add_option("--truth", tune_truth, "Truth adjacency JSON; adds f1.csv");
  t->add_option("--out-dir", tune_out, "Output directory")->required();

  // metrics
  std::string m_fit, m_truth, m_out;
  auto* m = app.add_subcommand("metrics", "Precision, recall and F1 of a fit against the truth");
  m->add_option("--fit", m_fit, "Fit JSON")->required();
  m->add_option("--truth", m_truth, "Truth adjacency JSON")->required();
  m->add_option("--out", m_out, "Output CSV (default: stdout)");

  // interpolate
  std::string i_fit, i_omegas, i_mode = "sum", i_out;
  double i_l1 = 0.0, i_l2 = 0.0;
  std::optional<double> i_tau;
  auto* ip = app.add_subcommand("interpolate", "Interpolate the edge set of an unobserved graph");
  ip->add_option("--fit", i_fit, "Fit JSON")->required();
  ip->add_option("--omegas", i_omegas, "Comma-separated smoothing coefficients, one per graph")->required();
  ip->add_option("--lambda1", i_l1, "Sparsity penalty")->required();
  ip->add_option("--lambda2", i_l2, "Smoothness penalty")->required();
  ip->add_option("--mode", i_mode, "sum or aggregate")->capture_default_str();
  ip->add_option("--tau", i_tau, "Edge threshold (default: the fit's tau)");
  ip->add_option("--out", i_out, "Output adjacency JSON (default: stdout)");

  // hamming
  std::string h_fit, h_out;
  auto* h = app.add_subcommand("hamming", "Pairwise Hamming distances between fitted graphs");
  h->add_option("--fit", h_fit, "Fit JSON")->required();
  h->add_option("--out", h_out, "Output m x m CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) {
      sim.graph_type = cvn::parse_graph_type(graph_type);
      return cmd_simulate(sim, sim_out);
    }
    if (*f) return cmd_fit(fit_problem, fit_pen, fit_solver, fit_out);
    if (*t) return cmd_tune(tune_problem, tune_solver, criterion, grid, tune_truth, tune_out);
    if (*m) return cmd_metrics(m_fit, m_truth, m_out);
    if (*ip) return cmd_interpolate(i_fit, i_omegas, i_l1, i_l2, i_mode, i_tau, i_out);
    if (*h) return cmd_hamming(h_fit, h_out);
  } catch (const UsageError& e) {
    std::cerr << "cvn: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const cvn::ConvergenceFailure& e) {
    std::cerr << "cvn: " << e.what() << '\n';
    return kNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "cvn: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
