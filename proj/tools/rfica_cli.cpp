// rfica: config-driven federated-ICA experiment runner.
//
// Subcommands: generate (write a scenario to disk), solve (local estimators),
// aggregate (run methods on stored estimates), sweep (full experiment),
// check (theory diagnostics on a stored trial).

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "rfica/bench.hpp"
#include "rfica/diagnostics.hpp"
#include "rfica/local_solver.hpp"
#include "rfica/model_gen.hpp"
#include "rfica/rng.hpp"

namespace fs = std::filesystem;
using namespace rfica;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value pairs
};

ExperimentConfig resolve_config(const ConfigArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = parse_config_file(args.config_path);
  }
  for (const auto& entry : args.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override must be key=value: " + entry);
    }
    apply_config_entry(cfg, entry.substr(0, eq), entry.substr(eq + 1));
  }
  validate_config(cfg);
  return cfg;
}

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (key = value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides,
                  "Override a config key, e.g. --set trials=5")
      ->take_all();
}

std::string client_file(const std::string& dir, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "client_%04d.bin", k);
  return (fs::path(dir) / buf).string();
}

std::string estimate_file(const std::string& dir, int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "estimate_%04d.bin", k);
  return (fs::path(dir) / buf).string();
}

int parse_trailing_index(const std::string& stem) {
  const auto pos = stem.find_last_of('_');
  return std::stoi(stem.substr(pos + 1));
}

int cmd_generate(const ConfigArgs& args, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed) {
  const ExperimentConfig cfg = resolve_config(args);
  ExperimentScenario sc;
  sc.r = cfg.r;
  sc.K = cfg.K_list.front();
  sc.n_normal = cfg.n_normal;
  sc.n_corrupt = cfg.corrupt_n_list.front();
  sc.corrupt_fraction = cfg.corrupt_fraction_list.front();
  sc.sparsity = cfg.sparsity;
  sc.seed = has_seed ? seed_override : cfg.base_seed;

  const Scenario scenario = make_scenario(sc);
  fs::create_directories(out_dir);
  save_matrix_csv(scenario.mixing.entries,
                  (fs::path(out_dir) / "A_star.csv").string());
  std::ofstream meta((fs::path(out_dir) / "scenario.txt").string());
  meta << "r = " << sc.r << "\nK = " << sc.K << "\nn_normal = " << sc.n_normal
       << "\ncorrupt_n = " << sc.n_corrupt
       << "\ncorrupt_fraction = " << sc.corrupt_fraction
       << "\nsparsity = " << sc.sparsity << "\nseed = " << sc.seed << "\n";
  meta << "corrupted =";
  for (const auto& client : scenario.clients) {
    if (client.corrupted) meta << ' ' << client.client_id;
  }
  meta << "\n";
  for (const auto& client : scenario.clients) {
    save_dataset(client, client_file(out_dir, client.client_id));
  }
  std::cout << "wrote scenario with " << scenario.clients.size()
            << " clients to " << out_dir << "\n";
  return 0;
}

int cmd_solve(const ConfigArgs& args, const std::string& data_dir,
              const std::string& out_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  fs::create_directories(out_dir);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("client_", 0) == 0 && entry.path().extension() == ".bin") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "no client_*.bin files in " << data_dir << "\n";
    return 1;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= files.size()) break;
      const int k = parse_trailing_index(fs::path(files[i]).stem().string());
      const ClientDataset ds = load_dataset(files[i], k);
      SolverConfig solver;
      solver.max_iters = cfg.solver_max_iters;
      solver.tol = cfg.solver_tol;
      solver.init_mode = cfg.init_mode;
      solver.seed = mix_seed(cfg.base_seed, 0xc11e47ULL + k);
      const LocalEstimate est = solve_client(ds, solver);
      if (est.failed) {
        std::fprintf(stderr, "warning: client %d failed: %s\n", k,
                     est.fail_reason.c_str());
        ++failures;
        continue;
      }
      save_estimate(est, estimate_file(out_dir, k));
    }
  };
  const int workers = std::max(
      1, std::min<int>(thread_budget(), static_cast<int>(files.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  std::cout << "solved " << files.size() - failures << "/" << files.size()
            << " clients into " << out_dir << "\n";
  return 0;
}

std::vector<LocalEstimate> load_estimates_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("estimate_", 0) == 0 && entry.path().extension() == ".bin") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw std::runtime_error("no estimate_*.bin files in " + dir);
  }
  std::vector<LocalEstimate> estimates;
  estimates.reserve(files.size());
  for (const auto& file : files) {
    const int k = parse_trailing_index(fs::path(file).stem().string());
    estimates.push_back(load_estimate(file, k));
  }
  return estimates;
}

int cmd_aggregate(const ConfigArgs& args, const std::string& est_dir,
                  const std::string& truth_path, const std::string& out_dir) {
  const ExperimentConfig cfg = resolve_config(args);
  const auto estimates = load_estimates_dir(est_dir);
  AggregationOptions opts;
  opts.kmeans_restarts = cfg.kmeans_restarts;
  opts.seed = cfg.base_seed;

  Matrix A_star;
  const bool have_truth = !truth_path.empty();
  if (have_truth) A_star = load_matrix_csv(truth_path);

  if (!out_dir.empty()) fs::create_directories(out_dir);
  for (MethodTag tag : cfg.methods) {
    AggregationResult result;
    switch (tag) {
      case MethodTag::kRfIca: result = rf_ica(estimates, opts); break;
      case MethodTag::kFicaCenters: result = fica_centers(estimates, opts); break;
      case MethodTag::kSimpleMean:
        result = simple_aggregate(estimates, SimpleMode::kMean, opts);
        break;
      case MethodTag::kSimpleMedian:
        result = simple_aggregate(estimates, SimpleMode::kMedian, opts);
        break;
    }
    std::cout << method_name(tag);
    if (have_truth) {
      std::cout << " frob_error="
                << signed_perm_distance(result.A_bar, A_star).first;
    }
    std::cout << "\n";
    if (!out_dir.empty()) {
      save_matrix_csv(result.A_bar,
                      (fs::path(out_dir) / (method_name(tag) + "_A_bar.csv"))
                          .string());
    }
  }
  return 0;
}

int cmd_check(const ConfigArgs& args, const std::string& est_dir,
              const std::string& truth_path) {
  const ExperimentConfig cfg = resolve_config(args);
  const auto estimates = load_estimates_dir(est_dir);
  const Matrix A_star = load_matrix_csv(truth_path);

  AggregationOptions opts;
  opts.kmeans_restarts = cfg.kmeans_restarts;
  opts.seed = cfg.base_seed;
  const ClusteredPool stage = build_clustered_pool(estimates, opts);
  const AggregationResult rf = aggregate_gm(stage, opts);
  const TheoryReport report = analyze_trial(stage, rf, A_star, cfg.lemma34_p);

  const double error = signed_perm_distance(rf.A_bar, A_star).first;
  std::cout << "frob_error " << error << "\n"
            << "eps_total " << report.eps_total << "\n"
            << "delta " << report.delta << "\n"
            << "snr_condition " << (report.snr_condition_holds ? "holds" : "fails")
            << "\n"
            << "lemma31_center " << (report.lemma31_center_ok ? "ok" : "FAIL")
            << (report.lemma31_vacuous ? " (vacuous)" : "") << "\n"
            << "lemma31_srate " << (report.lemma31_srate_ok ? "ok" : "FAIL")
            << (report.lemma31_vacuous ? " (vacuous)" : "") << "\n"
            << "lemma33 " << (report.lemma33_ok ? "ok" : "FAIL") << "\n"
            << "lemma34 " << (report.lemma34_ok ? "ok" : "FAIL")
            << (report.lemma34_vacuous ? " (vacuous)" : "") << "\n"
            << "theorem35 " << (report.thm35_ok ? "ok" : "FAIL")
            << (report.thm35_vacuous ? " (vacuous)" : "") << "\n"
            << "theorem35_bound " << report.thm35_bound << "\n";
  if (!report.notes.empty()) {
    std::cout << "notes: " << report.notes << "\n";
  }
  return 0;
}

int cmd_sweep(const ConfigArgs& args) {
  const ExperimentConfig cfg = resolve_config(args);
  const SweepResult result = run_sweep(cfg);

  const fs::path out(cfg.output_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const std::string trials_csv = cfg.output_path + "_trials.csv";
  emit_csv(result, trials_csv);
  const auto panels = emit_plot_data(result, cfg.output_path);

  std::cout << "wrote " << trials_csv << "\n";
  for (const auto& p : panels) std::cout << "wrote " << p << "\n";
  if (result.failures > 0) {
    std::cerr << "partial failure: " << result.failures << " of "
              << result.rows.size() << " rows failed\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust one-shot aggregation for federated ICA"};
  app.require_subcommand(1);

  ConfigArgs gen_args, solve_args, agg_args, sweep_args, check_args;
  std::string gen_out = "scenario";
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Write a synthetic scenario to disk");
  add_config_options(gen, gen_args);
  gen->add_option("--out", gen_out, "Output directory");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Scenario seed");

  std::string solve_data, solve_out = "estimates";
  auto* solve = app.add_subcommand("solve", "Compute local estimators");
  add_config_options(solve, solve_args);
  solve->add_option("--data", solve_data, "Scenario directory")->required();
  solve->add_option("--out", solve_out, "Estimate output directory");

  std::string agg_est, agg_truth, agg_out;
  auto* agg = app.add_subcommand("aggregate", "Aggregate stored estimates");
  add_config_options(agg, agg_args);
  agg->add_option("--estimates", agg_est, "Estimate directory")->required();
  agg->add_option("--truth", agg_truth, "Ground-truth mixing matrix CSV");
  agg->add_option("--out", agg_out, "Directory for aggregated matrices");

  auto* sweep = app.add_subcommand("sweep", "Run a full experiment sweep");
  add_config_options(sweep, sweep_args);

  std::string check_est, check_truth;
  auto* check = app.add_subcommand("check", "Theory diagnostics on a stored trial");
  add_config_options(check, check_args);
  check->add_option("--estimates", check_est, "Estimate directory")->required();
  check->add_option("--truth", check_truth, "Ground-truth mixing matrix CSV")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(gen_args, gen_out, gen_seed, !gen_seed_opt->empty());
    }
    if (solve->parsed()) return cmd_solve(solve_args, solve_data, solve_out);
    if (agg->parsed()) return cmd_aggregate(agg_args, agg_est, agg_truth, agg_out);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (check->parsed()) return cmd_check(check_args, check_est, check_truth);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
