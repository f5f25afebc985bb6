// Experiment runner: every trainer and solver as a subcommand with seeded
// RNG substreams, flat key=value config files, and CSV outputs.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "condex/csv.hpp"
#include "condex/dataset.hpp"
#include "condex/errors.hpp"
#include "condex/estimator.hpp"
#include "condex/links.hpp"
#include "condex/net.hpp"
#include "condex/optim.hpp"
#include "condex/oracle.hpp"
#include "condex/problems.hpp"
#include "condex/rng.hpp"

namespace fs = std::filesystem;
using namespace condex;

namespace {

constexpr const char* kVersion = "condex 1.0.0";

struct GridSpec {
  double lo = -2.0;
  double hi = 2.0;
  int n = 201;

  Grid1D build() const { return Grid1D::uniform(lo, hi, n); }
  std::string str() const {
    return std::to_string(lo) + "," + std::to_string(hi) + "," + std::to_string(n);
  }
};

GridSpec parse_grid(const std::string& s) {
  GridSpec g;
  if (std::sscanf(s.c_str(), "%lf,%lf,%d", &g.lo, &g.hi, &g.n) != 3 || g.n < 2 || !(g.lo < g.hi)) {
    throw ConfigError("bad grid spec '" + s + "', expected lo,hi,n");
  }
  return g;
}

struct RunConfig {
  std::uint64_t seed = 1;
  int samples = 0;   // 0: per-experiment default
  int hidden = 0;
  long iters = 0;
  std::vector<std::string> links;
  double link_a = std::nan("");
  double link_b = std::nan("");
  double mu = 0.001;
  double lambda = 0.99;
  double creg = std::nan("");  // per-experiment default when unset
  std::string mode = "full";
  int batch = 1;
  std::string grid;       // numeric-oracle grid, per-experiment default
  std::string eval_grid;  // output-curve grid, per-experiment default
  std::string out;
  bool strict_range = true;
  double tail_tol = 1e-4;
  bool strict_tail = false;
  long oracle_iters = 1000;
};

void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "master RNG seed");
  cmd->add_option("--samples", cfg.samples, "training sample count");
  cmd->add_option("--hidden", cfg.hidden, "hidden layer size");
  cmd->add_option("--iters", cfg.iters, "training iterations");
  cmd->add_option("--link", cfg.links, "link family id(s)")->delimiter(',');
  cmd->add_option("--link-a", cfg.link_a, "link parameter a");
  cmd->add_option("--link-b", cfg.link_b, "link parameter b");
  cmd->add_option("--mu", cfg.mu, "step size");
  cmd->add_option("--lambda", cfg.lambda, "power forgetting factor");
  cmd->add_option("--creg", cfg.creg, "power denominator regularizer");
  cmd->add_option("--mode", cfg.mode, "full | single | mini");
  cmd->add_option("--batch", cfg.batch, "mini-batch size");
  cmd->add_option("--grid", cfg.grid, "numeric grid as lo,hi,n");
  cmd->add_option("--eval-grid", cfg.eval_grid, "output curve grid as lo,hi,n");
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--oracle-iters", cfg.oracle_iters, "fixed-point iterations");
  cmd->add_option("--tail-tol", cfg.tail_tol, "tail mass tolerance");
  cmd->add_flag("--strict-tail", cfg.strict_tail, "treat tail-mass warnings as errors");
  cmd->add_flag("--strict-range,!--no-strict-range", cfg.strict_range,
                "reject targets outside the link range");
  cmd->set_config("--config", "", "flat key=value config file (keys mirror flag names)");
}

TrainConfig train_config(const RunConfig& cfg, double default_creg) {
  TrainConfig t;
  t.iters = cfg.iters;
  t.opt.mu = cfg.mu;
  t.opt.lambda = cfg.lambda;
  t.opt.c = std::isnan(cfg.creg) ? default_creg : cfg.creg;
  t.mode = parse_batch_mode(cfg.mode);
  t.batch_size = cfg.batch;
  t.strict_range = cfg.strict_range;
  return t;
}

LinkFamily make_link(const RunConfig& cfg, const std::string& id, double def_a, double def_b) {
  const double a = std::isnan(cfg.link_a) ? def_a : cfg.link_a;
  const double b = std::isnan(cfg.link_b) ? def_b : cfg.link_b;
  return LinkFamily::parse(id, a, b);
}

void write_manifest(const RunConfig& cfg, const std::string& experiment,
                    const std::map<std::string, std::string>& extra) {
  std::ofstream out(fs::path(cfg.out) / "manifest.txt");
  out << "version=" << kVersion << "\n";
  out << "experiment=" << experiment << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "samples=" << cfg.samples << "\n";
  out << "hidden=" << cfg.hidden << "\n";
  out << "iters=" << cfg.iters << "\n";
  std::string links;
  for (const auto& l : cfg.links) links += (links.empty() ? "" : ",") + l;
  out << "link=" << links << "\n";
  out << "mu=" << format_double(cfg.mu) << "\n";
  out << "lambda=" << format_double(cfg.lambda) << "\n";
  out << "mode=" << cfg.mode << "\n";
  out << "batch=" << cfg.batch << "\n";
  out << "strict-range=" << (cfg.strict_range ? 1 : 0) << "\n";
  for (const auto& [k, v] : extra) out << k << "=" << v << "\n";
}

void apply_defaults(RunConfig& cfg, int samples, int hidden, long iters,
                    const std::vector<std::string>& links, const std::string& grid,
                    const std::string& eval_grid, const std::string& out_dir) {
  if (cfg.samples == 0) cfg.samples = samples;
  if (cfg.hidden == 0) cfg.hidden = hidden;
  if (cfg.iters == 0) cfg.iters = iters;
  if (cfg.links.empty()) cfg.links = links;
  if (cfg.grid.empty()) cfg.grid = grid;
  if (cfg.eval_grid.empty()) cfg.eval_grid = eval_grid;
  if (cfg.out.empty()) cfg.out = out_dir;
  fs::create_directories(cfg.out);
}

void write_cost_history(const RunConfig& cfg, const std::vector<std::string>& names,
                        const std::vector<const std::vector<double>*>& histories) {
  CsvTable cost;
  cost.columns.push_back("iteration");
  for (const auto& n : names) cost.columns.push_back("cost_" + n);
  const std::size_t iters = histories.empty() ? 0 : histories[0]->size();
  for (std::size_t t = 0; t < iters; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    for (const auto* h : histories) row.push_back((*h)[t]);
    cost.add_row(row);
  }
  cost.write((fs::path(cfg.out) / "cost.csv").string());
}

// ---------------------------------------------------------------------------

int run_ce(RunConfig cfg, bool example_a) {
  const char* name = example_a ? "ce-a" : "ce-b";
  apply_defaults(cfg, 200, 50, 2000, example_a ? std::vector<std::string>{"A1", "A2", "A3"}
                                               : std::vector<std::string>{"A1", "C1"},
                 "", "-2,2,201", std::string("out/") + name);

  const double sw2 = 0.1;  // noise variance
  Rng x_rng = Rng::substream(cfg.seed, "data-x");
  Rng w_rng = Rng::substream(cfg.seed, "data-w");
  Eigen::VectorXd xs(cfg.samples), ys(cfg.samples);
  for (int i = 0; i < cfg.samples; ++i) {
    xs(i) = x_rng.normal();
    const double w = std::sqrt(sw2) * w_rng.normal();
    if (example_a) {
      ys(i) = sign(xs(i)) * xs(i) * xs(i) + w;
    } else {
      const double z = xs(i) + w;
      ys(i) = (z >= -1.0 && z <= 1.0) ? 1.0 : 0.0;
    }
  }
  const PairedDataset data = PairedDataset::from_scalar(xs, ys);

  auto exact = [&](double x) {
    if (example_a) return sign(x) * x * x;
    return norm_cdf((1.0 - x) / std::sqrt(sw2)) - norm_cdf((-1.0 - x) / std::sqrt(sw2));
  };

  const Grid1D eval = parse_grid(cfg.eval_grid).build();
  CsvTable curve;
  curve.columns = {"x", "exact"};
  std::vector<TrainedEstimator> fits;
  const TrainConfig tc = train_config(cfg, 0.001);
  for (const auto& id : cfg.links) {
    const LinkFamily link = make_link(cfg, id, -0.01, 1.01);
    Rng init = Rng::substream(cfg.seed, "init-" + id);
    fits.push_back(train_cond_expectation(data, scalar_identity(), std::nullopt, link,
                                          init_net(cfg.hidden, 1, init), tc));
    curve.columns.push_back("est_" + id);
  }
  for (int i = 0; i < eval.size(); ++i) {
    const double x = eval.points(i);
    std::vector<double> row{x, exact(x)};
    for (const auto& f : fits) row.push_back(f.predict(x));
    curve.add_row(row);
  }
  curve.write((fs::path(cfg.out) / "curve.csv").string());
  std::vector<const std::vector<double>*> histories;
  for (const auto& f : fits) histories.push_back(&f.cost_history);
  write_cost_history(cfg, cfg.links, histories);
  write_manifest(cfg, name, {{"eval-grid", cfg.eval_grid}, {"noise-variance", format_double(sw2)},
                             {"creg", format_double(tc.opt.c)}});
  return 0;
}

int run_stopping(RunConfig cfg) {
  apply_defaults(cfg, 500, 100, 2000, {"A1", "C1"}, "-30,30,5000", "-20,20,501", "out/stopping");
  const StoppingSpec spec = StoppingSpec::paper_example();

  const StoppingNumeric numeric =
      solve_stopping_numeric(spec, parse_grid(cfg.grid).build(), static_cast<int>(cfg.oracle_iters));
  if (cfg.strict_tail) numeric.f.require_tail_mass(cfg.tail_tol);

  Rng data_rng = Rng::substream(cfg.seed, "data");
  const Eigen::VectorXd traj = simulate_ar1(spec.dynamics, StationaryInit{}, cfg.samples, data_rng);

  const TrainConfig tc = train_config(cfg, 0.001);
  std::vector<TrainedEstimator> fits;
  for (const auto& id : cfg.links) {
    const LinkFamily link = make_link(cfg, id, 0.2, 1.0);
    Rng init = Rng::substream(cfg.seed, "init-" + id);
    fits.push_back(
        solve_stopping_datadriven(traj, spec, link, init_net(cfg.hidden, 1, init), tc));
  }

  const Grid1D eval = parse_grid(cfg.eval_grid).build();
  CsvTable curve;
  curve.columns = {"x", "p", "qU_numeric"};
  for (const auto& id : cfg.links) curve.columns.push_back("qU_" + id);
  for (int i = 0; i < eval.size(); ++i) {
    const double x = eval.points(i);
    const double q = spec.q_fn(x);
    std::vector<double> row{x, spec.p_fn(x), q + numeric.grid.interpolate(numeric.u, x)};
    for (const auto& f : fits) row.push_back(q + f.predict(x));
    curve.add_row(row);
  }
  curve.write((fs::path(cfg.out) / "curve.csv").string());
  std::vector<const std::vector<double>*> histories;
  for (const auto& f : fits) histories.push_back(&f.cost_history);
  write_cost_history(cfg, cfg.links, histories);
  write_manifest(cfg, "stopping",
                 {{"grid", cfg.grid},
                  {"eval-grid", cfg.eval_grid},
                  {"alpha", format_double(spec.alpha)},
                  {"creg", format_double(tc.opt.c)},
                  {"tail-mass-low", format_double(numeric.f.tail_mass_low)},
                  {"tail-mass-high", format_double(numeric.f.tail_mass_high)}});
  return 0;
}

int run_rl(RunConfig cfg) {
  apply_defaults(cfg, 1000, 100, 2000, {"C1"}, "-20,20,5000", "-5,5,501", "out/rl");
  const RlSpec spec = RlSpec::paper_example();
  const double def_a = 0.2 / (1.0 - spec.gamma);
  const double def_b = 1.0 / (1.0 - spec.gamma);

  const RlNumeric numeric =
      solve_rl_numeric(spec, parse_grid(cfg.grid).build(), static_cast<int>(cfg.oracle_iters));
  if (cfg.strict_tail) {
    for (const auto& f : numeric.f) f.require_tail_mass(cfg.tail_tol);
  }

  Rng action_rng = Rng::substream(cfg.seed, "actions");
  std::vector<int> actions(cfg.samples);
  for (auto& a : actions) a = action_rng.uniform_int(1, spec.num_actions());
  Rng data_rng = Rng::substream(cfg.seed, "data");
  const double x0 = std::sqrt(spec.actions[0].s) * data_rng.normal();
  const ControlledTrajectory traj = simulate_controlled(spec, actions, x0, data_rng);

  const std::string link_id = cfg.links[0];
  const LinkFamily link = make_link(cfg, link_id, def_a, def_b);
  const TrainConfig tc = train_config(cfg, 0.1);
  std::vector<LinkFamily> links(spec.num_actions(), link);
  std::vector<TrainConfig> tcs(spec.num_actions(), tc);
  std::vector<ShallowNet> nets;
  for (int j = 1; j <= spec.num_actions(); ++j) {
    Rng init = Rng::substream(cfg.seed, "init-" + link_id + "-" + std::to_string(j));
    nets.push_back(init_net(cfg.hidden, 1, init));
  }
  const RlDataDriven dd = solve_rl_datadriven(traj.transitions(), spec, links, std::move(nets), tcs);

  const Grid1D eval = parse_grid(cfg.eval_grid).build();
  CsvTable curve;
  curve.columns = {"s", "U1_num", "U2_num", "U1_est", "U2_est", "action"};
  for (int i = 0; i < eval.size(); ++i) {
    const double s = eval.points(i);
    curve.add_row({s, numeric.grid.interpolate(numeric.u[0], s),
                   numeric.grid.interpolate(numeric.u[1], s), dd.predict(1, s), dd.predict(2, s),
                   static_cast<double>(dd.optimal_action(s))});
  }
  curve.write((fs::path(cfg.out) / "curve.csv").string());
  write_cost_history(cfg, {link_id + "_1", link_id + "_2"},
                     {&dd.estimators[0].cost_history, &dd.estimators[1].cost_history});
  write_manifest(cfg, "rl",
                 {{"grid", cfg.grid},
                  {"eval-grid", cfg.eval_grid},
                  {"gamma", format_double(spec.gamma)},
                  {"creg", format_double(tc.opt.c)},
                  {"link-a", format_double(link.a())},
                  {"link-b", format_double(link.b())}});
  return 0;
}

int run_lr(RunConfig cfg) {
  apply_defaults(cfg, 5000, 50, 2000, {"B1"}, "", "-1,2,301", "out/lr");
  Rng g_rng = Rng::substream(cfg.seed, "data-g");
  Rng f_rng = Rng::substream(cfg.seed, "data-f");
  Eigen::MatrixXd gs(cfg.samples, 1), fsamp(cfg.samples, 1);
  for (int i = 0; i < cfg.samples; ++i) {
    gs(i, 0) = g_rng.normal();          // N(0, 1)
    fsamp(i, 0) = 1.0 + f_rng.normal(); // N(1, 1)
  }
  const LinkFamily link = make_link(cfg, cfg.links[0], 0.0, 1.0);
  Rng init = Rng::substream(cfg.seed, "init-" + cfg.links[0]);
  const TrainConfig tc = train_config(cfg, 0.001);
  const TrainedEstimator est = train_likelihood_ratio(gs, fsamp, link,
                                                      init_net(cfg.hidden, 1, init), tc);

  const Grid1D eval = parse_grid(cfg.eval_grid).build();
  CsvTable curve;
  curve.columns = {"x", "exact_log_ratio", "u_est"};
  for (int i = 0; i < eval.size(); ++i) {
    const double x = eval.points(i);
    curve.add_row({x, x - 0.5, est.predict_raw(x)});
  }
  curve.write((fs::path(cfg.out) / "curve.csv").string());
  write_cost_history(cfg, {cfg.links[0]}, {&est.cost_history});
  write_manifest(cfg, "lr", {{"eval-grid", cfg.eval_grid}, {"creg", format_double(tc.opt.c)}});
  return 0;
}

int run_oracle_check(RunConfig cfg) {
  if (cfg.out.empty()) cfg.out = "out/oracle-check";
  fs::create_directories(cfg.out);
  bool ok = true;
  std::ostringstream report;

  auto check_rows = [&](const char* label, const QuadMatrix& f) {
    const double dev = (f.entries.rowwise().sum().array() - 1.0).abs().maxCoeff();
    report << label << ": tail_low=" << format_double(f.tail_mass_low)
           << " tail_high=" << format_double(f.tail_mass_high)
           << " row_sum_dev=" << format_double(dev) << "\n";
    if (f.kind == QuadKind::CdfStencil && dev > 1e-12) ok = false;
    return dev;
  };

  // Stopping and RL kernels on their reference grids.
  const StoppingSpec stop_spec = StoppingSpec::paper_example();
  const Grid1D stop_grid = parse_grid(cfg.grid.empty() ? "-30,30,5000" : cfg.grid).build();
  check_rows("stopping-F", build_cdf_matrix(stop_spec.dynamics.cond_cdf(), stop_grid, stop_grid));
  const RlSpec rl_spec = RlSpec::paper_example();
  const Grid1D rl_grid = Grid1D::uniform(-20.0, 20.0, 5000);
  check_rows("rl-F1", build_cdf_matrix(rl_spec.actions[0].cond_cdf(), rl_grid, rl_grid));
  check_rows("rl-F2", build_cdf_matrix(rl_spec.actions[1].cond_cdf(), rl_grid, rl_grid));

  // Quadrature vs the two analytic conditional expectations.
  const double sw = std::sqrt(0.1);
  const Grid1D xg = Grid1D::uniform(-2.0, 2.0, 401);
  {
    const Grid1D yg = Grid1D::uniform(-6.0, 6.0, 5000);
    const QuadMatrix f = build_cdf_matrix(
        [&](double y, double x) { return norm_cdf((y - sign(x) * x * x) / sw); }, yg, xg);
    check_rows("example-a", f);
    if (f.tail_mass_low > cfg.tail_tol || f.tail_mass_high > cfg.tail_tol) ok = false;
    const Eigen::VectorXd u = cond_expectation_numeric(f, yg.points);
    double err = 0.0;
    for (int i = 0; i < xg.size(); ++i) {
      err = std::max(err, std::fabs(u(i) - sign(xg.points(i)) * xg.points(i) * xg.points(i)));
    }
    report << "example-a max_abs_err=" << format_double(err) << "\n";
    if (err > 1e-3) ok = false;
  }
  {
    const Grid1D yg = Grid1D::uniform(-0.5, 1.5, 5000);
    auto theta = [&](double x) { return norm_cdf((1.0 - x) / sw) - norm_cdf((-1.0 - x) / sw); };
    const QuadMatrix f = build_cdf_matrix(
        [&](double y, double x) {
          if (y < 0.0) return 0.0;
          if (y < 1.0) return 1.0 - theta(x);
          return 1.0;
        },
        yg, xg);
    check_rows("example-b", f);
    const Eigen::VectorXd u = cond_expectation_numeric(f, yg.points);
    double err = 0.0;
    for (int i = 0; i < xg.size(); ++i) err = std::max(err, std::fabs(u(i) - theta(xg.points(i))));
    report << "example-b max_abs_err=" << format_double(err) << "\n";
    if (err > 1e-3) ok = false;
  }

  report << (ok ? "oracle-check: OK" : "oracle-check: FAIL") << "\n";
  std::cout << report.str();
  std::ofstream(fs::path(cfg.out) / "report.txt") << report.str();
  return ok ? 0 : 1;
}

int run_compare(const std::string& file_a, const std::string& file_b, const std::string& col_a,
                const std::string& col_b, double lo, double hi, const std::string& metric,
                double threshold) {
  const CsvTable a = CsvTable::read(file_a);
  const CsvTable b = CsvTable::read(file_b);
  if (a.rows.size() != b.rows.size()) {
    throw GridMismatch("row counts differ: " + std::to_string(a.rows.size()) + " vs " +
                       std::to_string(b.rows.size()));
  }
  const int xa = 0, xb = 0;
  const int va = a.column_index(col_a.empty() ? a.columns.at(1) : col_a);
  const int vb = b.column_index(col_b.empty() ? b.columns.at(1) : col_b);
  double acc = 0.0, worst = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const double x = a.rows[i][xa];
    if (std::fabs(x - b.rows[i][xb]) > 1e-12) {
      throw GridMismatch("grid columns differ at row " + std::to_string(i));
    }
    if (x < lo || x > hi) continue;
    const double d = a.rows[i][va] - b.rows[i][vb];
    acc += d * d;
    worst = std::max(worst, std::fabs(d));
    ++count;
  }
  if (count == 0) throw ConfigError("no rows inside the comparison interval");
  const double value = metric == "maxabs" ? worst : std::sqrt(acc / count);
  std::cout << format_double(value) << "\n";
  return value <= threshold ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven conditional expectation estimation and fixed-point solvers"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  auto* ce_a = app.add_subcommand("ce-a", "conditional expectation, Y = sign(X) X^2 + W");
  add_run_flags(ce_a, cfg);
  auto* ce_b = app.add_subcommand("ce-b", "conditional expectation, Y = 1_{[-1,1]}(X + W)");
  add_run_flags(ce_b, cfg);
  auto* stopping = app.add_subcommand("stopping", "Markov optimal stopping, AR(1) example");
  add_run_flags(stopping, cfg);
  auto* rl = app.add_subcommand("rl", "two-action reinforcement learning example");
  add_run_flags(rl, cfg);
  auto* lr = app.add_subcommand("lr", "likelihood ratio, N(0,1) vs N(1,1)");
  add_run_flags(lr, cfg);
  auto* oracle = app.add_subcommand("oracle-check", "quadrature self-checks");
  add_run_flags(oracle, cfg);

  auto* compare = app.add_subcommand("compare", "metric between two curve CSVs");
  std::string file_a, file_b, col_a, col_b, metric = "rmse";
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double threshold = std::numeric_limits<double>::infinity();
  compare->add_option("file_a", file_a)->required();
  compare->add_option("file_b", file_b)->required();
  compare->add_option("--col", col_a, "value column in file_a (default: second column)");
  compare->add_option("--ref-col", col_b, "value column in file_b (default: second column)");
  compare->add_option("--lo", lo, "interval lower end");
  compare->add_option("--hi", hi, "interval upper end");
  compare->add_option("--metric", metric)->check(CLI::IsMember({"rmse", "maxabs"}));
  compare->add_option("--threshold", threshold, "exit 0 iff metric <= threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ce_a->parsed()) return run_ce(cfg, true);
    if (ce_b->parsed()) return run_ce(cfg, false);
    if (stopping->parsed()) return run_stopping(cfg);
    if (rl->parsed()) return run_rl(cfg);
    if (lr->parsed()) return run_lr(cfg);
    if (oracle->parsed()) return run_oracle_check(cfg);
    if (compare->parsed()) {
      return run_compare(file_a, file_b, col_a, col_b, lo, hi, metric, threshold);
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
