// Command-line front end: fit, simulate, ampute, bench, impute.
//
// Exit codes: 0 success (fit: converged), 2 fit did not converge (results
// still written), 64 usage error, 65 data or config file error, 1 anything
// else.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cnmix/bench.hpp"
#include "cnmix/ecm_mcnm.hpp"
#include "cnmix/io.hpp"
#include "cnmix/metrics.hpp"
#include "cnmix/rng.hpp"
#include "cnmix/simulate.hpp"
#include "cnmix/tmix.hpp"

namespace fs = std::filesystem;
using namespace cnmix;

namespace {

std::uint64_t env_default_seed() {
  if (const char* v = std::getenv("CNMIX_SEED")) {
    try {
      return std::stoull(v);
    } catch (...) {
      std::cerr << "warning: ignoring unparseable CNMIX_SEED='" << v << "'\n";
    }
  }
  return 1;
}

struct FitFlags {
  std::string data;
  std::string model = "mcnm";
  int g = 0;
  int g_max = 0;
  std::string config;
  std::string missing_token = "NA";
  std::string out = ".";
  FitConfig cfg;
};

void add_fit_config_flags(CLI::App* cmd, FitConfig& cfg) {
  cmd->add_option("--tol", cfg.tol, "relative log-likelihood tolerance");
  cmd->add_option("--max-iter", cfg.max_iter, "iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--starts", cfg.n_starts, "number of starts")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--alpha-min", cfg.alpha_min, "lower clamp on alpha");
  cmd->add_option("--alpha-max", cfg.alpha_max, "upper clamp on alpha");
  cmd->add_option("--eta-min", cfg.eta_min, "lower clamp on eta");
  cmd->add_option("--ridge", cfg.ridge, "Cholesky repair coefficient");
  cmd->add_option("--fix-nu", cfg.fix_nu, "pin the t degrees of freedom");
  cmd->add_option("--t-outlier-quantile", cfg.t_outlier_quantile,
                  "chi-square cutoff for the t outlier call");
}

FitResult run_one_fit(const Dataset& ds, const std::string& model, int g,
                      const FitConfig& cfg) {
  return model == "mcnm" ? fit_mcnm(ds, g, cfg) : fit_tmix(ds, g, cfg);
}

void print_fit_summary(const FitResult& r, int g) {
  std::cout << "model:        " << model_family_name(r.family) << "\n";
  std::cout << "loglik:       " << format_double(r.loglik()) << "\n";
  std::cout << "iterations:   " << r.n_iter
            << (r.converged ? " (converged)" : " (max iterations)") << "\n";
  std::cout << "BIC:          " << format_double(r.bic) << "\n";
  std::vector<int> sizes(static_cast<std::size_t>(g), 0);
  for (int l : r.labels) ++sizes[static_cast<std::size_t>(l - 1)];
  std::cout << "cluster sizes:";
  for (int s : sizes) std::cout << ' ' << s;
  std::cout << "\n";
  int outliers = 0;
  for (auto f : r.outlier_flag) outliers += f ? 1 : 0;
  std::cout << "outliers:     " << outliers << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_fit(const FitFlags& flags, const CLI::App* cmd) {
  FitConfig cfg = flags.cfg;
  if (!flags.config.empty()) {
    // Precedence: explicit flags, then the config file, then the
    // environment-seeded defaults.
    FitConfig base;
    base.seed = env_default_seed();
    FitConfig merged = fit_config_from_json_file(flags.config, base);
    if (cmd->count("--tol")) merged.tol = cfg.tol;
    if (cmd->count("--max-iter")) merged.max_iter = cfg.max_iter;
    if (cmd->count("--starts")) merged.n_starts = cfg.n_starts;
    if (cmd->count("--alpha-min")) merged.alpha_min = cfg.alpha_min;
    if (cmd->count("--alpha-max")) merged.alpha_max = cfg.alpha_max;
    if (cmd->count("--eta-min")) merged.eta_min = cfg.eta_min;
    if (cmd->count("--ridge")) merged.ridge = cfg.ridge;
    if (cmd->count("--fix-nu")) merged.fix_nu = cfg.fix_nu;
    if (cmd->count("--t-outlier-quantile"))
      merged.t_outlier_quantile = cfg.t_outlier_quantile;
    if (cmd->count("--seed")) merged.seed = cfg.seed;
    cfg = merged;
  }

  const Dataset ds = load_dataset(flags.data, flags.missing_token);
  ds.validate();

  const int g_hi = std::max(flags.g, flags.g_max);
  FitResult best;
  int best_g = flags.g;
  bool have = false;
  for (int g = flags.g; g <= g_hi; ++g) {
    FitResult r = run_one_fit(ds, flags.model, g, cfg);
    if (g_hi > flags.g)
      std::cout << "G=" << g << "  BIC=" << format_double(r.bic)
                << "  loglik=" << format_double(r.loglik()) << "\n";
    if (!have || r.bic < best.bic) {
      best = std::move(r);
      best_g = g;
      have = true;
    }
  }
  if (g_hi > flags.g) std::cout << "selected G=" << best_g << " by BIC\n";

  const fs::path out(flags.out);
  fs::create_directories(out);
  save_fit_result(best, cfg, out / "result.json");
  write_labels_file(best.labels, out / "labels.csv");
  write_flags_file(best.outlier_flag, out / "outliers.csv");
  write_dataset(best.imputed, out / "imputed.csv");
  print_fit_summary(best, best_g);
  return best.converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based clustering, outlier detection and imputation "
               "for incomplete data with contaminated-normal mixtures"};
  app.require_subcommand(1);
  const std::uint64_t default_seed = env_default_seed();

  // fit
  FitFlags fit_flags;
  fit_flags.cfg.seed = default_seed;
  auto* fit_cmd = app.add_subcommand("fit", "fit a mixture to a dataset");
  fit_cmd->add_option("--data", fit_flags.data, "input dataset")->required();
  fit_cmd->add_option("--model", fit_flags.model, "mcnm or tmix")
      ->check(CLI::IsMember({"mcnm", "tmix"}));
  fit_cmd->add_option("--g", fit_flags.g, "number of components")
      ->required()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--g-max", fit_flags.g_max,
                      "fit G..G_MAX and keep the best BIC")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--config", fit_flags.config, "fit config JSON");
  fit_cmd->add_option("--missing-token", fit_flags.missing_token,
                      "token marking missing cells");
  fit_cmd->add_option("--out", fit_flags.out, "output directory");
  add_fit_config_flags(fit_cmd, fit_flags.cfg);

  // simulate
  std::string sim_family = "mcn", sim_overlap = "far", sim_config, sim_out = ".";
  ScenarioConfig scen;
  scen.seed = default_seed;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a labeled dataset");
  sim_cmd->add_option("--family", sim_family,
                      "student_t, mcn, mn_atypical or mn_uniform_noise");
  sim_cmd->add_option("--n", scen.n, "rows")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--overlap", sim_overlap, "far or close")
      ->check(CLI::IsMember({"far", "close"}));
  sim_cmd->add_option("--d", scen.d, "dimension")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", scen.seed, "RNG seed");
  sim_cmd->add_option("--config", sim_config, "scenario config JSON");
  sim_cmd->add_option("--out", sim_out, "output directory");

  // ampute
  std::string amp_data, amp_config, amp_out = ".";
  AmputationConfig amp;
  amp.seed = default_seed;
  auto* amp_cmd = app.add_subcommand("ampute", "hide values in a dataset");
  amp_cmd->add_option("--data", amp_data, "input dataset")->required();
  amp_cmd->add_option("--prop", amp.prop_rows, "fraction of rows to ampute");
  amp_cmd->add_option("--seed", amp.seed, "RNG seed");
  amp_cmd->add_option("--config", amp_config, "amputation config JSON");
  amp_cmd->add_option("--out", amp_out, "output directory");

  // bench
  std::string bench_grid, bench_config, bench_out = ".";
  int bench_replicates = 0;
  bool full_paper_scale = false;
  std::uint64_t bench_seed = default_seed;
  auto* bench_cmd = app.add_subcommand("bench", "run the simulation study");
  bench_cmd->add_option("--grid", bench_grid, "grid config JSON");
  bench_cmd->add_option("--replicates", bench_replicates,
                        "replicates per cell")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_seed, "base seed");
  bench_cmd->add_option("--config", bench_config, "fit config JSON");
  bench_cmd->add_option("--out", bench_out, "output directory")->required();
  bench_cmd->add_flag("--full-paper-scale", full_paper_scale,
                      "20 replicates per cell");

  // impute
  std::string imp_data, imp_fit, imp_out = ".", imp_token = "NA";
  auto* imp_cmd =
      app.add_subcommand("impute", "fill missing cells from a saved fit");
  imp_cmd->add_option("--data", imp_data, "input dataset")->required();
  imp_cmd->add_option("--fit", imp_fit, "saved fit document")->required();
  imp_cmd->add_option("--missing-token", imp_token,
                      "token marking missing cells");
  imp_cmd->add_option("--out", imp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (*fit_cmd) {
      return cmd_fit(fit_flags, fit_cmd);
    }
    if (*sim_cmd) {
      ScenarioConfig cfg = scen;
      if (!sim_config.empty()) {
        cfg = scenario_config_from_json_file(sim_config, scen);
        if (sim_cmd->count("--n")) cfg.n = scen.n;
        if (sim_cmd->count("--d")) cfg.d = scen.d;
        if (sim_cmd->count("--seed")) cfg.seed = scen.seed;
      }
      if (sim_cmd->count("--family") || sim_config.empty())
        cfg.family = family_from_name(sim_family);
      if (sim_cmd->count("--overlap") || sim_config.empty())
        cfg.overlap = overlap_from_name(sim_overlap);
      const LabeledDataset lds = generate_scenario(cfg);
      fs::create_directories(sim_out);
      write_dataset(lds.data, fs::path(sim_out) / "data.csv");
      write_truth_file(lds, fs::path(sim_out) / "truth.json");
      std::cout << "wrote " << lds.data.n() << " rows (" << family_name(cfg.family)
                << ", " << overlap_name(cfg.overlap) << ")\n";
      return 0;
    }
    if (*amp_cmd) {
      AmputationConfig cfg = amp;
      if (!amp_config.empty()) {
        cfg = amputation_config_from_json_file(amp_config, amp);
        if (amp_cmd->count("--prop")) cfg.prop_rows = amp.prop_rows;
        if (amp_cmd->count("--seed")) cfg.seed = amp.seed;
      }
      const Dataset ds = load_dataset(amp_data);
      AmputeInfo info;
      const Dataset out = ampute(ds, cfg, &info);
      fs::create_directories(amp_out);
      write_dataset(out, fs::path(amp_out) / "amputed.csv");
      if (!info.warning.empty()) std::cerr << "warning: " << info.warning << "\n";
      std::cout << "amputed " << info.amputed_rows << " of " << ds.n()
                << " rows\n";
      return 0;
    }
    if (*bench_cmd) {
      StudyGrid grid;
      if (!bench_grid.empty()) grid = grid_from_json_file(bench_grid, grid);
      if (bench_cmd->count("--seed")) grid.base_seed = bench_seed;
      if (bench_replicates > 0) grid.replicates = bench_replicates;
      if (full_paper_scale) grid.replicates = 20;
      FitConfig fit_cfg;
      if (!bench_config.empty())
        fit_cfg = fit_config_from_json_file(bench_config, fit_cfg);
      const StudyReport report = run_study(grid, fit_cfg);
      write_study_report(report, bench_out);
      int failed = 0;
      for (const auto& rec : report.runs)
        failed += (rec.mcnm.ok ? 0 : 1) + (rec.tmix.ok ? 0 : 1);
      std::cout << report.runs.size() << " runs over "
                << report.cells.size() << " cells; " << failed
                << " model fits failed; report in " << bench_out << "\n";
      return 0;
    }
    if (*imp_cmd) {
      const Dataset ds = load_dataset(imp_data, imp_token);
      ds.validate();
      const SavedFit fit = load_fit_model(imp_fit);
      Dataset out;
      if (fit.family == ModelFamily::Mcnm) {
        out = impute_dataset(ds, fit.mcnm);
      } else {
        const auto state = t_e_step(ds, fit.tmix);
        std::vector<int> labels(static_cast<std::size_t>(ds.n()));
        for (Eigen::Index i = 0; i < ds.n(); ++i) {
          int arg = 0;
          for (int c = 1; c < fit.tmix.g_count(); ++c)
            if (state.z_tilde(i, c) > state.z_tilde(i, arg)) arg = c;
          labels[static_cast<std::size_t>(i)] = arg + 1;
        }
        out = fill_missing(ds, state, labels);
      }
      fs::create_directories(imp_out);
      write_dataset(out, fs::path(imp_out) / "imputed.csv");
      int filled = 0;
      for (Eigen::Index i = 0; i < ds.n(); ++i)
        for (Eigen::Index j = 0; j < ds.d(); ++j)
          if (!ds.mask(i, j)) ++filled;
      std::cout << "filled " << filled << " cells\n";
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 65;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 65;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
