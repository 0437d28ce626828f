#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sphcov/errors.hpp"
#include "sphcov/estimators.hpp"
#include "sphcov/io.hpp"
#include "sphcov/model_selection.hpp"
#include "sphcov/parallel.hpp"
#include "sphcov/postprocess.hpp"
#include "sphcov/simulation.hpp"

namespace sphcov::cli {

namespace {

using nlohmann::json;

// Removes every registered output unless the command commits, so failed runs
// leave no partial files behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& path : paths_) std::remove(path.c_str());
  }
  std::string track(const std::string& path) {
    paths_.push_back(path);
    return path;
  }
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path);
  try {
    json cfg;
    in >> cfg;
    return cfg;
  } catch (const json::exception& e) {
    throw config_error("bad config file " + path + ": " + e.what());
  }
}

// Command-line flags override config-file values, which override defaults.
template <typename T>
void merge_opt(const CLI::App* cmd, const json& cfg, const std::string& name,
               T& value) {
  if (cmd->count("--" + name) == 0 && cfg.contains(name)) {
    try {
      value = cfg.at(name).get<T>();
    } catch (const json::exception& e) {
      throw config_error("config key '" + name + "': " + e.what());
    }
  }
}

struct KernelFlags {
  std::string spec;  // JSON wins over the individual flags
  double nu = 2.5;
  double eps = 0.4;
  double sobolev_p = 0.0;  // > 1 selects the Sobolev family
  int l_max = 256;
};

void add_kernel_flags(CLI::App* cmd, KernelFlags& k) {
  cmd->add_option("--kernel", k.spec, "Kernel spec as JSON");
  cmd->add_option("--nu", k.nu, "Matern smoothness (1/2, 3/2, 5/2)");
  cmd->add_option("--eps", k.eps, "Matern scale");
  cmd->add_option("--sobolev-p", k.sobolev_p,
                  "Use the Sobolev operator family with this growth order");
  cmd->add_option("--lmax", k.l_max, "Series truncation degree");
}

void merge_kernel_flags(const CLI::App* cmd, const json& cfg, KernelFlags& k) {
  merge_opt(cmd, cfg, "kernel", k.spec);
  merge_opt(cmd, cfg, "nu", k.nu);
  merge_opt(cmd, cfg, "eps", k.eps);
  merge_opt(cmd, cfg, "sobolev-p", k.sobolev_p);
  merge_opt(cmd, cfg, "lmax", k.l_max);
}

ZonalKernel resolve_kernel(const KernelFlags& k) {
  if (!k.spec.empty()) return kernel_from_json(k.spec);
  if (k.sobolev_p > 0.0) {
    return green_kernel_dstar_d(sobolev_operator(k.sobolev_p, k.l_max));
  }
  return matern_zonal(k.nu, k.eps);
}

struct SolverFlags {
  double threshold = 0.01;
  double tol = 1e-8;
  std::int64_t max_iter = 0;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& s) {
  cmd->add_option("--threshold", s.threshold,
                  "Gram sparsification threshold (fraction of psi(1))");
  cmd->add_option("--tol", s.tol, "CG relative residual target");
  cmd->add_option("--max-iter", s.max_iter, "CG iteration cap (0 = auto)");
}

void merge_solver_flags(const CLI::App* cmd, const json& cfg, SolverFlags& s) {
  merge_opt(cmd, cfg, "threshold", s.threshold);
  merge_opt(cmd, cfg, "tol", s.tol);
  merge_opt(cmd, cfg, "max-iter", s.max_iter);
}

SolverConfig resolve_solver(const SolverFlags& s) {
  SolverConfig cfg;
  cfg.threshold_frac = s.threshold;
  cfg.tol = s.tol;
  cfg.max_iter = s.max_iter;
  return cfg;
}

std::string estimate_type(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty estimate file " + path);
  try {
    return json::parse(line).at("type").get<std::string>();
  } catch (const json::exception& e) {
    throw io_error("bad estimate header in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateParams {
  std::string out;
  int n = 64;
  int r = 12;
  double sigma = 0.1;
  std::uint64_t seed = 1;
  int q = 5;
  std::uint64_t model_seed = 20210;
  double far1 = 0.0;
  bool has_far1 = false;
  std::string model_path;
  KernelFlags kernel;
};

int run_simulate(const SimulateParams& p) {
  if (p.out.empty()) throw config_error("simulate: --out is required");
  if (p.n < 1 || p.r < 1) throw config_error("simulate: need n >= 1, r >= 1");
  if (p.sigma < 0.0) throw config_error("simulate: sigma must be >= 0");
  if (p.q < 1) throw config_error("simulate: q must be >= 1");

  SourceModel model = [&] {
    if (!p.model_path.empty()) return load_model(p.model_path);
    const ZonalKernel kernel = resolve_kernel(p.kernel);
    // The reference 5x5 weight covariance when Q matches it, a seeded
    // random PSD matrix otherwise.
    Eigen::MatrixXd cov = p.q == 5 ? default_weight_cov()
                                   : random_weight_cov(p.q, p.model_seed);
    return make_source_model(sample_uniform_sphere(static_cast<std::size_t>(p.q),
                                                   p.model_seed),
                             std::move(cov), kernel);
  }();

  const Dataset data =
      p.has_far1 ? simulate_far1(model, p.n, p.r, p.sigma, p.far1, p.seed)
                 : simulate_dataset(model, p.n, p.r, p.sigma, p.seed);

  OutputGuard guard;
  save_dataset(data, p.seed, guard.track(p.out + ".csv"),
               guard.track(p.out + ".meta.json"));
  save_model(model, guard.track(p.out + ".model.json"));
  guard.commit();
  std::cout << "wrote " << p.out << ".csv (" << data.total_samples()
            << " samples, n=" << data.n() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitParams {
  std::string data;
  std::string out;
  std::string report;
  std::string dump_j;
  std::string target = "second-moment";
  double eta = 0.0;
  bool has_eta = false;
  int lag = 0;
  KernelFlags kernel;
  SolverFlags solver;
};

double default_mean_eta(const Dataset& data, const ZonalKernel& kernel) {
  // eta ~ (n rbar)^{-p/(p+1)} with rbar the harmonic mean replicate size.
  double inv_sum = 0.0;
  for (const auto& rep : data.replicates) {
    inv_sum += 1.0 / static_cast<double>(rep.locations.size());
  }
  const double rbar = static_cast<double>(data.n()) / inv_sum;
  const double p = kernel.growth_order();
  return std::pow(static_cast<double>(data.n()) * rbar, -p / (p + 1.0));
}

int run_fit(const FitParams& p) {
  if (p.data.empty() || p.out.empty()) {
    throw config_error("fit: --data and --out are required");
  }
  if (p.target != "second-moment" && p.target != "mean") {
    throw config_error("fit: --target must be 'second-moment' or 'mean'");
  }
  if (p.lag != 0 && p.target != "second-moment") {
    throw config_error("fit: --lag applies to the second-moment target");
  }
  const ZonalKernel kernel = resolve_kernel(p.kernel);
  const Dataset data =
      load_dataset(p.data + ".csv", p.data + ".meta.json");

  OutputGuard guard;
  FitReport report;
  double eta = p.eta;
  if (p.target == "mean") {
    if (!p.has_eta) eta = default_mean_eta(data, kernel);
    if (!(eta > 0.0)) throw config_error("fit: eta must be > 0");
    const MeanEstimate est = fit_mean(data, kernel, eta, &report);
    save_mean_estimate(est, guard.track(p.out));
  } else {
    if (!p.has_eta) throw config_error("fit: --eta is required");
    if (!(eta > 0.0)) throw config_error("fit: eta must be > 0");
    const SolverConfig solver = resolve_solver(p.solver);
    const SecondMomentEstimate est =
        p.lag == 0 ? fit_second_moment(data, kernel, eta, solver, &report)
                   : fit_lag_autocov(data, kernel, eta, p.lag, solver, &report);
    save_second_moment_estimate(est, guard.track(p.out));
    if (!p.dump_j.empty()) {
      std::vector<std::vector<SphericalPoint>> locs;
      for (const auto& rep : data.replicates) locs.push_back(rep.locations);
      save_coordinate_format(build_J(locs, kernel, p.solver.threshold),
                             guard.track(p.dump_j));
    }
  }
  if (!p.report.empty()) {
    save_fit_report(report, eta, p.lag, guard.track(p.report));
  }
  guard.commit();
  std::cout << "fit " << p.target << " (eta=" << eta << ", lag=" << p.lag
            << ", path=" << report.path
            << ", cg_iterations=" << report.cg_iterations << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cv

struct CvParams {
  std::string data;
  std::string out;
  double eta_min = 1.0;
  double eta_max = 6.0;
  int eta_points = 11;
  std::string eta_grid;  // comma-separated override
  int folds = 4;
  std::uint64_t cv_seed = 0;
  KernelFlags kernel;
  SolverFlags solver;
};

std::vector<double> resolve_eta_grid(const CvParams& p) {
  std::vector<double> grid;
  if (!p.eta_grid.empty()) {
    std::stringstream ss(p.eta_grid);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        grid.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw config_error("cv: bad --eta-grid entry '" + cell + "'");
      }
    }
    return grid;
  }
  if (p.eta_points < 1) throw config_error("cv: eta-points must be >= 1");
  if (!(p.eta_min > 0.0) || p.eta_max < p.eta_min) {
    throw config_error("cv: need 0 < eta-min <= eta-max");
  }
  for (int i = 0; i < p.eta_points; ++i) {
    const double frac =
        p.eta_points == 1 ? 0.0
                          : static_cast<double>(i) / (p.eta_points - 1);
    grid.push_back(p.eta_min + frac * (p.eta_max - p.eta_min));
  }
  return grid;
}

int run_cv(const CvParams& p) {
  if (p.data.empty() || p.out.empty()) {
    throw config_error("cv: --data and --out are required");
  }
  CVConfig cfg;
  cfg.k_folds = p.folds;
  cfg.eta_grid = resolve_eta_grid(p);
  cfg.shuffle_seed = p.cv_seed;
  const ZonalKernel kernel = resolve_kernel(p.kernel);
  const Dataset data = load_dataset(p.data + ".csv", p.data + ".meta.json");

  const CVReport report =
      kfold_cv_second_moment(data, kernel, cfg, resolve_solver(p.solver));

  OutputGuard guard;
  save_cv_report(report, guard.track(p.out + ".json"),
                 guard.track(p.out + ".csv"));
  guard.commit();
  std::cout << "cv selected eta=" << report.selected_eta << " over "
            << report.eta_grid.size() << " grid points\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalParams {
  std::string estimate;
  std::string out;
  int grid = 400;
  std::string truth;
  std::string mean_estimate;
  bool project_psd_flag = false;
};

int run_eval(const EvalParams& p) {
  if (p.estimate.empty() || p.out.empty()) {
    throw config_error("eval: --estimate and --out are required");
  }
  if (p.grid < 2) throw config_error("eval: grid needs at least 2 nodes");
  const SphereGrid grid = fibonacci_grid(static_cast<std::size_t>(p.grid));
  const std::string type = estimate_type(p.estimate);

  GridField field;
  if (type == "mean") {
    if (p.project_psd_flag) {
      throw config_error("eval: --project-psd needs a bivariate estimate");
    }
    field = eval_on_grid(load_mean_estimate(p.estimate), grid);
  } else if (type == "second_moment") {
    const SecondMomentEstimate est = load_second_moment_estimate(p.estimate);
    if (!p.mean_estimate.empty()) {
      field = eval_covariance_on_grid(
          est, load_mean_estimate(p.mean_estimate), grid);
    } else {
      field = eval_on_grid(est, grid);
    }
  } else {
    throw io_error("unknown estimate type '" + type + "'");
  }

  OutputGuard guard;
  json report;
  report["grid_nodes"] = p.grid;
  save_grid_field(field, guard.track(p.out + ".nodes.csv"),
                  guard.track(p.out + ".values.csv"));

  if (p.project_psd_flag) {
    const PsdProjection projection = project_psd(field);
    save_grid_field(projection.field, guard.track(p.out + ".projected.nodes.csv"),
                    guard.track(p.out + ".projected.values.csv"));
    report["clipped_mass"] = projection.clipped_mass;
    report["clipped_count"] = projection.clipped_count;
    if (!p.truth.empty()) {
      const GridField truth =
          eval_truth_on_grid(load_model(p.truth), grid);
      report["l2_error_projected"] = l2_error(projection.field, truth);
    }
  }
  if (!p.truth.empty()) {
    if (!field.bivariate) {
      throw config_error("eval: --truth compares second-moment fields");
    }
    const GridField truth = eval_truth_on_grid(load_model(p.truth), grid);
    report["l2_error"] = l2_error(field, truth);
  }
  {
    std::ofstream out(guard.track(p.out + ".report.json"));
    if (!out) throw io_error("cannot open " + p.out + ".report.json");
    out << report.dump(2) << "\n";
  }
  guard.commit();
  std::cout << "evaluated on " << p.grid << " nodes";
  if (report.contains("l2_error")) {
    std::cout << ", l2_error=" << report["l2_error"].get<double>();
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Nonparametric covariance estimation for spherical random "
               "fields from sparse noisy samples"};
  app.require_subcommand(1);
  unsigned threads = 0;
  std::string config_path;
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");
  app.add_option("--config", config_path,
                 "JSON config file; command-line flags take precedence");

  SimulateParams sim;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Sample a sparse-source Gaussian field dataset");
  sim_cmd->add_option("--out", sim.out, "Output prefix");
  sim_cmd->add_option("--n", sim.n, "Number of replicates");
  sim_cmd->add_option("--r", sim.r, "Samples per replicate");
  sim_cmd->add_option("--sigma", sim.sigma, "Measurement noise sd");
  sim_cmd->add_option("--seed", sim.seed, "Dataset seed");
  sim_cmd->add_option("--q", sim.q, "Number of field sources");
  sim_cmd->add_option("--model-seed", sim.model_seed,
                      "Seed for source locations (and weight_cov when q != 5)");
  sim_cmd->add_option("--far1", sim.far1,
                      "AR(1) coefficient; makes the dataset time-ordered");
  sim_cmd->add_option("--model", sim.model_path,
                      "Load a model JSON instead of generating one");
  add_kernel_flags(sim_cmd, sim.kernel);

  FitParams fit;
  auto* fit_cmd =
      app.add_subcommand("fit", "Fit a mean or second-moment estimate");
  fit_cmd->add_option("--data", fit.data, "Dataset prefix");
  fit_cmd->add_option("--out", fit.out, "Estimate output file");
  fit_cmd->add_option("--eta", fit.eta, "Penalty parameter");
  fit_cmd->add_option("--lag", fit.lag, "Autocovariance lag (time-ordered data)");
  fit_cmd->add_option("--target", fit.target, "'second-moment' or 'mean'");
  fit_cmd->add_option("--report", fit.report, "Run report JSON path");
  fit_cmd->add_option("--dump-j", fit.dump_j,
                      "Dump the sparse kernel Gram in coordinate format");
  add_kernel_flags(fit_cmd, fit.kernel);
  add_solver_flags(fit_cmd, fit.solver);

  CvParams cv;
  auto* cv_cmd = app.add_subcommand(
      "cv", "K-fold cross-validation over the penalty parameter");
  cv_cmd->add_option("--data", cv.data, "Dataset prefix");
  cv_cmd->add_option("--out", cv.out, "Report output prefix");
  cv_cmd->add_option("--eta-min", cv.eta_min, "Grid lower end");
  cv_cmd->add_option("--eta-max", cv.eta_max, "Grid upper end");
  cv_cmd->add_option("--eta-points", cv.eta_points, "Grid size");
  cv_cmd->add_option("--eta-grid", cv.eta_grid,
                     "Comma-separated eta grid (overrides min/max/points)");
  cv_cmd->add_option("--folds", cv.folds, "Number of folds");
  cv_cmd->add_option("--cv-seed", cv.cv_seed, "Shuffle seed");
  add_kernel_flags(cv_cmd, cv.kernel);
  add_solver_flags(cv_cmd, cv.solver);

  EvalParams ev;
  auto* eval_cmd =
      app.add_subcommand("eval", "Evaluate an estimate on a spherical grid");
  eval_cmd->add_option("--estimate", ev.estimate, "Estimate file");
  eval_cmd->add_option("--out", ev.out, "Output prefix");
  eval_cmd->add_option("--grid", ev.grid, "Fibonacci grid size");
  eval_cmd->add_option("--truth", ev.truth,
                       "Model JSON for an l2 error report");
  eval_cmd->add_option("--mean-estimate", ev.mean_estimate,
                       "Mean estimate file; evaluates the covariance");
  eval_cmd->add_flag("--project-psd", ev.project_psd_flag,
                     "Also project onto the PSD cone");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json cfg = json::object();
    if (!config_path.empty()) cfg = load_config_file(config_path);
    set_max_threads(threads);

    if (sim_cmd->parsed()) {
      merge_opt(sim_cmd, cfg, "out", sim.out);
      merge_opt(sim_cmd, cfg, "n", sim.n);
      merge_opt(sim_cmd, cfg, "r", sim.r);
      merge_opt(sim_cmd, cfg, "sigma", sim.sigma);
      merge_opt(sim_cmd, cfg, "seed", sim.seed);
      merge_opt(sim_cmd, cfg, "q", sim.q);
      merge_opt(sim_cmd, cfg, "model-seed", sim.model_seed);
      merge_opt(sim_cmd, cfg, "model", sim.model_path);
      merge_kernel_flags(sim_cmd, cfg, sim.kernel);
      sim.has_far1 = sim_cmd->count("--far1") > 0 || cfg.contains("far1");
      merge_opt(sim_cmd, cfg, "far1", sim.far1);
      return run_simulate(sim);
    }
    if (fit_cmd->parsed()) {
      merge_opt(fit_cmd, cfg, "data", fit.data);
      merge_opt(fit_cmd, cfg, "out", fit.out);
      merge_opt(fit_cmd, cfg, "lag", fit.lag);
      merge_opt(fit_cmd, cfg, "target", fit.target);
      merge_opt(fit_cmd, cfg, "report", fit.report);
      merge_opt(fit_cmd, cfg, "dump-j", fit.dump_j);
      merge_kernel_flags(fit_cmd, cfg, fit.kernel);
      merge_solver_flags(fit_cmd, cfg, fit.solver);
      fit.has_eta = fit_cmd->count("--eta") > 0 || cfg.contains("eta");
      merge_opt(fit_cmd, cfg, "eta", fit.eta);
      return run_fit(fit);
    }
    if (cv_cmd->parsed()) {
      merge_opt(cv_cmd, cfg, "data", cv.data);
      merge_opt(cv_cmd, cfg, "out", cv.out);
      merge_opt(cv_cmd, cfg, "eta-min", cv.eta_min);
      merge_opt(cv_cmd, cfg, "eta-max", cv.eta_max);
      merge_opt(cv_cmd, cfg, "eta-points", cv.eta_points);
      merge_opt(cv_cmd, cfg, "eta-grid", cv.eta_grid);
      merge_opt(cv_cmd, cfg, "folds", cv.folds);
      merge_opt(cv_cmd, cfg, "cv-seed", cv.cv_seed);
      merge_kernel_flags(cv_cmd, cfg, cv.kernel);
      merge_solver_flags(cv_cmd, cfg, cv.solver);
      return run_cv(cv);
    }
    merge_opt(eval_cmd, cfg, "estimate", ev.estimate);
    merge_opt(eval_cmd, cfg, "out", ev.out);
    merge_opt(eval_cmd, cfg, "grid", ev.grid);
    merge_opt(eval_cmd, cfg, "truth", ev.truth);
    merge_opt(eval_cmd, cfg, "mean-estimate", ev.mean_estimate);
    if (cfg.contains("project-psd") && eval_cmd->count("--project-psd") == 0) {
      ev.project_psd_flag = cfg.at("project-psd").get<bool>();
    }
    return run_eval(ev);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sphcov::cli
