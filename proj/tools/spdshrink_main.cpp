// Command-line surface: estimation, two-group difference maps, and the
// synthetic experiment harness.  Exit codes: 0 success, 2 input/config
// error, 3 non-fatal numerical warning (results written, flagged).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spdshrink/distributions.hpp"
#include "spdshrink/errors.hpp"
#include "spdshrink/io.hpp"
#include "spdshrink/shrinkage.hpp"
#include "spdshrink/simulate.hpp"
#include "spdshrink/tweedie.hpp"

namespace {

using namespace spdshrink;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoError,
          "cannot open '" + path.string() + "' for writing");
  return out;
}

TensorField single_observation_field(const std::vector<Matrix>& matrices) {
  TensorField field;
  field.N = static_cast<int>(matrices.front().rows());
  field.n = 1;
  field.sites.reserve(matrices.size());
  for (const Matrix& m : matrices) field.sites.push_back({m});
  return field;
}

int run_estimate(const std::string& input, const std::string& output,
                 bool known_variance, const std::string& config_path) {
  ConfigMap config =
      config_path.empty() ? ConfigMap{} : parse_config_file(config_path);
  reject_unknown_keys(config, {"max_iters", "grad_tol"});
  LbfgsOptions options;
  options.max_iters = config_int(config, "max_iters", options.max_iters);
  options.grad_tol = config_double(config, "grad_tol", options.grad_tol);

  const TensorField field = read_tensor_field(input);
  const SiteStats stats = site_stats(field.sites);
  std::filesystem::create_directories(output);
  const std::filesystem::path dir(output);

  int exit_code = 0;
  auto summary = open_output(dir / "hyperparams.csv");
  summary << "key,value\n";
  summary << "p," << stats.p() << "\n";
  summary << "N," << stats.N << "\n";
  summary << "q," << stats.q << "\n";
  summary << "n," << stats.n << "\n";

  if (known_variance) {
    const ShrinkageResult result = estimate_fm_known_var(stats);
    write_tensor_field((dir / "means.spdf").string(),
                       single_observation_field(result.means));
    write_tensor_field((dir / "prior_mean.spdf").string(),
                       single_observation_field({result.hyper.mu}));
    summary << "mode,known-variance\n";
    summary << "lambda," << fmt_g17(result.hyper.lambda) << "\n";
    summary << "sure_final," << fmt_g17(result.sure_value) << "\n";
    summary << "iterations," << result.iterations << "\n";
    summary << "converged," << (result.converged ? 1 : 0) << "\n";
    if (!result.converged) {
      std::cerr << "warning: SURE minimization did not converge; "
                   "results written\n";
      exit_code = 3;
    }
  } else {
    const Hyperparams start = init_hyperparams(stats);
    const double sure_init = sure_full(stats, start);
    const SureFit fit = minimize_sure(stats, options);
    const ShrinkageResult result = posterior_estimates(stats, fit.hyper);
    write_tensor_field((dir / "means.spdf").string(),
                       single_observation_field(result.means));
    write_tensor_field((dir / "covs.spdf").string(),
                       single_observation_field(result.covs));
    write_tensor_field((dir / "prior_mean.spdf").string(),
                       single_observation_field({fit.hyper.mu}));
    write_tensor_field((dir / "prior_scale.spdf").string(),
                       single_observation_field({fit.hyper.psi}));
    summary << "mode,full\n";
    summary << "lambda," << fmt_g17(fit.hyper.lambda) << "\n";
    summary << "nu," << fmt_g17(fit.hyper.nu) << "\n";
    summary << "sure_init," << fmt_g17(sure_init) << "\n";
    summary << "sure_final," << fmt_g17(fit.sure_value) << "\n";
    summary << "iterations," << fit.iterations << "\n";
    summary << "converged," << (fit.converged ? 1 : 0) << "\n";
    summary << "grad_norm," << fmt_g17(fit.grad_norm) << "\n";
    if (!fit.converged) {
      std::cerr << "warning: SURE minimization did not converge; "
                   "results written\n";
      exit_code = 3;
    }
  }
  require(summary.good(), Err::IoError, "failed writing hyperparams.csv");
  return exit_code;
}

int run_groupdiff(const std::string& group1, const std::string& group2,
                  const std::string& output, double top_fraction_flag,
                  int smooth_flag, const std::string& config_path) {
  ConfigMap config =
      config_path.empty() ? ConfigMap{} : parse_config_file(config_path);
  reject_unknown_keys(config,
                      {"degree", "bins", "max_iters", "tol", "top_fraction",
                       "smooth_window", "grid_rows", "grid_cols"});
  TweedieConfig tweedie;
  tweedie.degree = config_int(config, "degree", tweedie.degree);
  tweedie.bins = config_int(config, "bins", tweedie.bins);
  tweedie.max_iters = config_int(config, "max_iters", tweedie.max_iters);
  tweedie.tol = config_double(config, "tol", tweedie.tol);
  tweedie.top_fraction =
      config_double(config, "top_fraction", tweedie.top_fraction);
  if (top_fraction_flag > 0.0) tweedie.top_fraction = top_fraction_flag;
  int smooth_window = config_int(config, "smooth_window", 1);
  if (smooth_flag > 0) smooth_window = smooth_flag;
  require(smooth_window >= 1 && smooth_window % 2 == 1, Err::ConfigError,
          "smoothing window must be odd and >= 1");
  const int grid_rows = config_int(config, "grid_rows", 0);
  const int grid_cols = config_int(config, "grid_cols", 0);

  const TensorField field1 = read_tensor_field(group1);
  const TensorField field2 = read_tensor_field(group2);
  GroupData data{field1.sites, field2.sites};
  const auto [t2, pooled] = hotelling_t2(data);
  const int q = vec_dim(field1.N);
  const FStatistics fs = to_f_stats(t2, field1.n, field2.n, q);
  const NoncentralityMap map = tweedie_iterate(fs, tweedie);

  std::filesystem::create_directories(output);
  const std::filesystem::path dir(output);
  const int p = static_cast<int>(t2.size());

  auto sites = open_output(dir / "sites.csv");
  sites << "site,t2,z,lambda_mom,lambda_tweedie,selected,mom_fallback\n";
  for (int i = 0; i < p; ++i) {
    sites << i << ',' << fmt_g17(t2[i]) << ',' << fmt_g17(fs.z[i]) << ','
          << fmt_g17(map.lambda_mom[i]) << ','
          << fmt_g17(map.lambda_tweedie[i]) << ','
          << static_cast<int>(map.selected[i]) << ','
          << static_cast<int>(map.mom_fallback[i]) << "\n";
  }
  require(sites.good(), Err::IoError, "failed writing sites.csv");

  int n_selected = 0;
  for (auto s : map.selected) n_selected += s;
  auto summary = open_output(dir / "summary.csv");
  summary << "key,value\n";
  summary << "p," << p << "\n";
  summary << "n1," << field1.n << "\n";
  summary << "n2," << field2.n << "\n";
  summary << "dof1," << fmt_g17(fs.dof1) << "\n";
  summary << "dof2," << fmt_g17(fs.dof2) << "\n";
  summary << "top_fraction," << fmt_g17(tweedie.top_fraction) << "\n";
  summary << "n_selected," << n_selected << "\n";
  summary << "iterations," << map.iterations << "\n";
  summary << "converged," << (map.converged ? 1 : 0) << "\n";
  require(summary.good(), Err::IoError, "failed writing summary.csv");

  if (grid_rows > 0 || grid_cols > 0) {
    require(grid_rows > 0 && grid_cols > 0 && grid_rows * grid_cols == p,
            Err::ConfigError,
            "grid_rows * grid_cols must equal the number of sites");
    GridMap grid{grid_rows, grid_cols, map.lambda_tweedie};
    const GridMap smoothed = smooth_map(grid, smooth_window);
    auto out = open_output(dir / "smoothed.csv");
    out << "row,col,lambda_tweedie,lambda_smooth\n";
    for (int r = 0; r < grid_rows; ++r) {
      for (int c = 0; c < grid_cols; ++c) {
        out << r << ',' << c << ','
            << fmt_g17(grid.values[r * grid_cols + c]) << ','
            << fmt_g17(smoothed.values[r * grid_cols + c]) << "\n";
      }
    }
    require(out.good(), Err::IoError, "failed writing smoothed.csv");
  }

  if (!map.converged) {
    std::cerr << "warning: noncentrality iteration hit its cap; "
                 "results written\n";
    return 3;
  }
  return 0;
}

int run_simulate_risk(const std::string& config_path,
                      const std::string& output_flag, bool seed_set,
                      std::uint64_t seed_flag) {
  const ConfigMap config = parse_config_file(config_path);
  reject_unknown_keys(config,
                      {"output", "seed", "n", "reps", "p_grid", "lambda",
                       "nu", "matrix_dim", "mu_scale", "psi_scale",
                       "estimators"});
  RiskExperimentConfig rc = default_risk_config();
  const int dim = config_int(config, "matrix_dim", 3);
  require(dim >= 1, Err::ConfigError, "matrix_dim must be >= 1");
  const int q = vec_dim(dim);
  const double mu_scale = config_double(config, "mu_scale", 1.0);
  const double psi_scale = config_double(config, "psi_scale", 1.0);
  require(mu_scale > 0.0 && psi_scale > 0.0, Err::ConfigError,
          "mu_scale and psi_scale must be positive");
  rc.prior.mu = mu_scale * Matrix::Identity(dim, dim);
  rc.prior.psi = psi_scale * Matrix::Identity(q, q);
  rc.prior.lambda = config_double(config, "lambda", rc.prior.lambda);
  rc.prior.nu = config_double(config, "nu", rc.prior.nu);
  rc.n = config_int(config, "n", rc.n);
  rc.reps = config_int(config, "reps", rc.reps);
  rc.p_grid = config_int_list(config, "p_grid", rc.p_grid);
  rc.estimators = config_string_list(config, "estimators", rc.estimators);
  rc.seed = config_u64(config, "seed", rc.seed);
  if (seed_set) rc.seed = seed_flag;
  const std::string output =
      output_flag.empty() ? config_string(config, "output", "") : output_flag;
  require(!output.empty(), Err::ConfigError,
          "an output directory is required (config key 'output' or --output)");

  const RiskRun run = run_risk_experiment(rc);

  std::filesystem::create_directories(output);
  const std::filesystem::path dir(output);
  auto table = open_output(dir / "risk_table.csv");
  table << "estimator,p,mean_loss,std_err\n";
  for (const RiskRow& row : run.table.rows) {
    table << row.estimator << ',' << row.p << ',' << fmt_g17(row.mean_loss)
          << ',' << fmt_g17(row.std_err) << "\n";
    // Wall-clock figures go to stderr only: output files must stay
    // byte-identical across reruns and thread counts.
    std::cerr << "runtime " << row.estimator << " p=" << row.p << ": "
              << row.runtime_sec << " s\n";
  }
  require(table.good(), Err::IoError, "failed writing risk_table.csv");

  auto plot = open_output(dir / "plot_risk.csv");
  plot << "p";
  for (const auto& name : rc.estimators) plot << ',' << name;
  plot << "\n";
  for (const int p : rc.p_grid) {
    plot << p;
    for (const auto& name : rc.estimators) {
      for (const RiskRow& row : run.table.rows) {
        if (row.p == p && row.estimator == name) {
          plot << ',' << fmt_g17(row.mean_loss);
        }
      }
    }
    plot << "\n";
  }
  require(plot.good(), Err::IoError, "failed writing plot_risk.csv");

  if (run.non_converged_fits > 0) {
    std::cerr << "warning: " << run.non_converged_fits
              << " replicate fit(s) did not converge; results written\n";
    return 3;
  }
  return 0;
}

int run_simulate_groups(const std::string& config_path,
                        const std::string& output_flag, bool seed_set,
                        std::uint64_t seed_flag) {
  const ConfigMap config = parse_config_file(config_path);
  reject_unknown_keys(config, {"output", "seed", "rows", "cols", "n1", "n2",
                               "sigma_lo", "sigma_hi", "degree", "bins",
                               "max_iters", "tol", "smooth_window"});
  GroupExperimentConfig gc = default_group_config();
  gc.rows = config_int(config, "rows", gc.rows);
  gc.cols = config_int(config, "cols", gc.cols);
  gc.n1 = config_int(config, "n1", gc.n1);
  gc.n2 = config_int(config, "n2", gc.n2);
  gc.sigma_lo = config_double(config, "sigma_lo", gc.sigma_lo);
  gc.sigma_hi = config_double(config, "sigma_hi", gc.sigma_hi);
  gc.tweedie.degree = config_int(config, "degree", gc.tweedie.degree);
  gc.tweedie.bins = config_int(config, "bins", gc.tweedie.bins);
  gc.tweedie.max_iters =
      config_int(config, "max_iters", gc.tweedie.max_iters);
  gc.tweedie.tol = config_double(config, "tol", gc.tweedie.tol);
  gc.seed = config_u64(config, "seed", gc.seed);
  if (seed_set) gc.seed = seed_flag;
  const int smooth_window = config_int(config, "smooth_window", 1);
  require(smooth_window >= 1 && smooth_window % 2 == 1, Err::ConfigError,
          "smoothing window must be odd and >= 1");
  const std::string output =
      output_flag.empty() ? config_string(config, "output", "") : output_flag;
  require(!output.empty(), Err::ConfigError,
          "an output directory is required (config key 'output' or --output)");

  const auto [map, metrics] = run_group_experiment(gc);
  const std::vector<std::uint8_t> mask = changed_mask(gc);
  const int p = gc.rows * gc.cols;
  int n_changed = 0;
  for (auto m : mask) n_changed += m;

  std::filesystem::create_directories(output);
  const std::filesystem::path dir(output);

  auto metrics_out = open_output(dir / "metrics.csv");
  metrics_out << "key,value\n";
  metrics_out << "p," << p << "\n";
  metrics_out << "n_changed," << n_changed << "\n";
  metrics_out << "f1_tweedie," << fmt_g17(metrics.f1_tweedie) << "\n";
  metrics_out << "f1_mom," << fmt_g17(metrics.f1_mom) << "\n";
  metrics_out << "mse_tweedie," << fmt_g17(metrics.mse_tweedie) << "\n";
  metrics_out << "mse_mom," << fmt_g17(metrics.mse_mom) << "\n";
  metrics_out << "iterations," << map.iterations << "\n";
  metrics_out << "converged," << (map.converged ? 1 : 0) << "\n";
  require(metrics_out.good(), Err::IoError, "failed writing metrics.csv");

  auto sites = open_output(dir / "sites.csv");
  sites << "site,row,col,truth_lambda,changed,t2,z,lambda_mom,"
           "lambda_tweedie,selected,mom_fallback\n";
  for (int i = 0; i < p; ++i) {
    sites << i << ',' << i / gc.cols << ',' << i % gc.cols << ','
          << fmt_g17(metrics.truth_lambda[i]) << ','
          << static_cast<int>(mask[i]) << ',' << fmt_g17(metrics.t2[i]) << ','
          << fmt_g17(metrics.z[i]) << ',' << fmt_g17(map.lambda_mom[i]) << ','
          << fmt_g17(map.lambda_tweedie[i]) << ','
          << static_cast<int>(map.selected[i]) << ','
          << static_cast<int>(map.mom_fallback[i]) << "\n";
  }
  require(sites.good(), Err::IoError, "failed writing sites.csv");

  GridMap grid{gc.rows, gc.cols, map.lambda_tweedie};
  const GridMap smoothed = smooth_map(grid, smooth_window);
  auto plot = open_output(dir / "map_tweedie.csv");
  plot << "row,col,lambda_tweedie,lambda_smooth\n";
  for (int r = 0; r < gc.rows; ++r) {
    for (int c = 0; c < gc.cols; ++c) {
      plot << r << ',' << c << ',' << fmt_g17(grid.values[r * gc.cols + c])
           << ',' << fmt_g17(smoothed.values[r * gc.cols + c]) << "\n";
    }
  }
  require(plot.good(), Err::IoError, "failed writing map_tweedie.csv");

  if (!map.converged) {
    std::cerr << "warning: noncentrality iteration hit its cap; "
                 "results written\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "spdshrink: empirical-Bayes shrinkage and group-difference maps for "
      "SPD-valued data under the Log-Euclidean metric"};
  app.require_subcommand(1);

  std::string est_input, est_output, est_config;
  bool known_variance = false;
  auto* est = app.add_subcommand(
      "estimate", "Shrinkage estimates for one group of SPD observations");
  est->add_option("--input", est_input, "SPDF1 tensor-field file")
      ->required();
  est->add_option("--output", est_output, "output directory")->required();
  est->add_flag("--known-variance", known_variance,
                "mean-only estimator with per-site variances from scatter "
                "traces");
  est->add_option("--config", est_config, "key=value options file");

  std::string gd_group1, gd_group2, gd_output, gd_config;
  double gd_top_fraction = -1.0;
  int gd_smooth = 0;
  auto* gd = app.add_subcommand(
      "groupdiff", "Two-group difference map with selection-bias correction");
  gd->add_option("--group1", gd_group1, "SPDF1 file for group 1")->required();
  gd->add_option("--group2", gd_group2, "SPDF1 file for group 2")->required();
  gd->add_option("--output", gd_output, "output directory")->required();
  gd->add_option("--top-fraction", gd_top_fraction,
                 "fraction of sites to flag (overrides config)");
  gd->add_option("--smooth", gd_smooth,
                 "odd moving-average window for the smoothed map");
  gd->add_option("--config", gd_config, "key=value options file");

  std::string sr_config, sr_output;
  std::uint64_t sr_seed = 0;
  auto* sr = app.add_subcommand("simulate-risk",
                                "Synthetic shrinkage risk experiment");
  sr->add_option("--config", sr_config, "key=value experiment config")
      ->required();
  sr->add_option("--seed", sr_seed, "override the config seed");
  sr->add_option("--output", sr_output, "override the config output dir");

  std::string sg_config, sg_output;
  std::uint64_t sg_seed = 0;
  auto* sg = app.add_subcommand("simulate-groups",
                                "Synthetic group-difference experiment");
  sg->add_option("--config", sg_config, "key=value experiment config")
      ->required();
  sg->add_option("--seed", sg_seed, "override the config seed");
  sg->add_option("--output", sg_output, "override the config output dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (est->parsed()) {
      return run_estimate(est_input, est_output, known_variance, est_config);
    }
    if (gd->parsed()) {
      return run_groupdiff(gd_group1, gd_group2, gd_output, gd_top_fraction,
                           gd_smooth, gd_config);
    }
    if (sr->parsed()) {
      return run_simulate_risk(sr_config, sr_output,
                               sr->count("--seed") > 0, sr_seed);
    }
    if (sg->parsed()) {
      return run_simulate_groups(sg_config, sg_output,
                                 sg->count("--seed") > 0, sg_seed);
    }
  } catch (const spdshrink::Error& e) {
    std::cerr << "error [" << spdshrink::err_name(e.code()) << "]: "
              << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
