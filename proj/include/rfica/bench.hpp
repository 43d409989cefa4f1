#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfica/diagnostics.hpp"
#include "rfica/types.hpp"

namespace rfica {

struct ExperimentConfig {
  int r = 10;
  std::vector<int> K_list{30};
  std::int64_t n_normal = 5000;
  std::vector<std::int64_t> corrupt_n_list{300};
  std::vector<double> corrupt_fraction_list{0.1};
  double sparsity = 0.1;
  int trials = 20;
  int kmeans_restarts = 10;
  std::vector<MethodTag> methods{MethodTag::kRfIca, MethodTag::kFicaCenters,
                                 MethodTag::kSimpleMean, MethodTag::kSimpleMedian};
  InitMode init_mode = InitMode::kRandomOrthogonal;
  std::uint64_t base_seed = 1;
  std::string output_path = "sweep";
  int solver_max_iters = 500;
  double solver_tol = 1e-8;
  double lemma34_p = 0.75;
};

ExperimentConfig parse_config_file(const std::string& path);
// Applies one "key = value" setting; used for both files and flag overrides.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);
void validate_config(const ExperimentConfig& cfg);

struct SweepCell {
  int K = 30;
  std::int64_t corrupt_n = 300;
  double corrupt_fraction = 0.1;
};

struct TrialRow {
  std::string method;
  int K = 0;
  double corrupt_fraction = 0.0;
  std::int64_t corrupt_n = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double frob_error = 0.0;
  double runtime_ms = 0.0;
  double eps_total = 0.0;
  double delta = 0.0;
  bool snr_ok = false;
  bool lemma31_ok = false;
  bool lemma33_ok = false;
  bool lemma34_ok = false;
  bool thm35_ok = false;
  double thm35_bound = 0.0;
  bool failed = false;
};

struct CellStats {
  SweepCell cell;
  std::string method;
  double mean = 0.0;
  double stderr_mean = 0.0;
  int count = 0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<TrialRow> rows;
  std::vector<CellStats> stats;
  int failures = 0;
};

std::uint64_t trial_seed(const ExperimentConfig& cfg, const SweepCell& cell,
                         int trial_index);

// One scenario instantiation scored by every requested method on identical
// inputs. Theory diagnostics are trial-level and repeated on each method row.
std::vector<TrialRow> run_trial(const ExperimentConfig& cfg,
                                const SweepCell& cell, int trial_index);

// Cartesian product of the listed axes, trials per cell, parallel across
// trials (RFICA_THREADS caps the workers). Deterministic output ordering.
SweepResult run_sweep(const ExperimentConfig& cfg);

std::string csv_header();
void emit_csv(const SweepResult& result, const std::string& path);
// One long-format file per swept axis: x, method, mean, stderr. Cells on a
// panel hold the other axes at their defaults.
std::vector<std::string> emit_plot_data(const SweepResult& result,
                                        const std::string& base_path);

// Binary container: 8-byte magic, uint64 r, uint64 n, column-major doubles.
void save_estimate(const LocalEstimate& est, const std::string& path);
LocalEstimate load_estimate(const std::string& path, int client_id);
void save_dataset(const ClientDataset& ds, const std::string& path);
ClientDataset load_dataset(const std::string& path, int client_id);

void save_matrix_csv(const Matrix& m, const std::string& path);
Matrix load_matrix_csv(const std::string& path);

int thread_budget();

}  // namespace rfica
