#include "rfica/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rfica/local_solver.hpp"
#include "rfica/model_gen.hpp"
#include "rfica/rng.hpp"

namespace rfica {

namespace {

constexpr char kEstimateMagic[8] = {'R', 'F', 'I', 'C', 'A', 'E', 'S', 'T'};
constexpr char kDatasetMagic[8] = {'R', 'F', 'I', 'C', 'A', 'D', 'A', 'T'};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

MethodTag parse_method(const std::string& name) {
  if (name == "rf_ica") return MethodTag::kRfIca;
  if (name == "fica_centers") return MethodTag::kFicaCenters;
  if (name == "simple_mean") return MethodTag::kSimpleMean;
  if (name == "simple_median") return MethodTag::kSimpleMedian;
  throw std::invalid_argument("unknown method: " + name);
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "random_orthogonal") return InitMode::kRandomOrthogonal;
  if (name == "shared") return InitMode::kShared;
  if (name == "identity") return InitMode::kIdentity;
  throw std::invalid_argument("unknown init_mode: " + name);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& raw_key,
                        const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "r") {
    cfg.r = std::stoi(value);
  } else if (key == "K") {
    cfg.K_list.clear();
    for (const auto& item : split_list(value)) cfg.K_list.push_back(std::stoi(item));
  } else if (key == "n_normal") {
    cfg.n_normal = std::stoll(value);
  } else if (key == "corrupt_n") {
    cfg.corrupt_n_list.clear();
    for (const auto& item : split_list(value)) {
      cfg.corrupt_n_list.push_back(std::stoll(item));
    }
  } else if (key == "corrupt_fraction") {
    cfg.corrupt_fraction_list.clear();
    for (const auto& item : split_list(value)) {
      cfg.corrupt_fraction_list.push_back(std::stod(item));
    }
  } else if (key == "sparsity") {
    cfg.sparsity = std::stod(value);
  } else if (key == "trials") {
    cfg.trials = std::stoi(value);
  } else if (key == "kmeans_restarts") {
    cfg.kmeans_restarts = std::stoi(value);
  } else if (key == "methods") {
    cfg.methods.clear();
    for (const auto& item : split_list(value)) cfg.methods.push_back(parse_method(item));
  } else if (key == "init_mode") {
    cfg.init_mode = parse_init_mode(value);
  } else if (key == "base_seed") {
    cfg.base_seed = std::stoull(value);
  } else if (key == "output_path") {
    cfg.output_path = value;
  } else if (key == "solver_max_iters") {
    cfg.solver_max_iters = std::stoi(value);
  } else if (key == "solver_tol") {
    cfg.solver_tol = std::stod(value);
  } else if (key == "lemma34_p") {
    cfg.lemma34_p = std::stod(value);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    }
    apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.K_list.empty() || cfg.corrupt_n_list.empty() ||
      cfg.corrupt_fraction_list.empty() || cfg.methods.empty()) {
    throw std::invalid_argument("config lists must be non-empty");
  }
  if (cfg.trials < 1) {
    throw std::invalid_argument("trials must be at least 1");
  }
  if (cfg.r < 2) {
    throw std::invalid_argument("r must be at least 2");
  }
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, const SweepCell& cell,
                         int trial_index) {
  std::uint64_t h = mix_seed(cfg.base_seed, 0x63656c6cULL);
  h = mix_seed(h, static_cast<std::uint64_t>(cfg.r));
  h = mix_seed(h, static_cast<std::uint64_t>(cfg.n_normal));
  h = mix_seed(h, static_cast<std::uint64_t>(cell.K));
  h = mix_seed(h, static_cast<std::uint64_t>(cell.corrupt_n));
  h = mix_seed(h, static_cast<std::uint64_t>(
                      std::llround(cell.corrupt_fraction * 1e6)));
  return mix_seed(h, static_cast<std::uint64_t>(trial_index));
}

std::vector<TrialRow> run_trial(const ExperimentConfig& cfg,
                                const SweepCell& cell, int trial_index) {
  using clock = std::chrono::steady_clock;
  const std::uint64_t seed = trial_seed(cfg, cell, trial_index);

  std::vector<TrialRow> rows;
  rows.reserve(cfg.methods.size());
  auto base_row = [&](MethodTag tag) {
    TrialRow row;
    row.method = method_name(tag);
    row.K = cell.K;
    row.corrupt_fraction = cell.corrupt_fraction;
    row.corrupt_n = cell.corrupt_n;
    row.trial = trial_index;
    row.seed = seed;
    return row;
  };

  try {
    ExperimentScenario sc;
    sc.r = cfg.r;
    sc.K = cell.K;
    sc.n_normal = cfg.n_normal;
    sc.n_corrupt = cell.corrupt_n;
    sc.corrupt_fraction = cell.corrupt_fraction;
    sc.sparsity = cfg.sparsity;
    sc.seed = seed;
    const Scenario scenario = make_scenario(sc);

    Matrix shared_init;
    if (cfg.init_mode == InitMode::kShared) {
      shared_init = generate_mixing(cfg.r, mix_seed(seed, 0x1417ULL)).entries;
    }

    std::vector<LocalEstimate> estimates;
    estimates.reserve(scenario.clients.size());
    for (const auto& client : scenario.clients) {
      SolverConfig solver;
      solver.max_iters = cfg.solver_max_iters;
      solver.tol = cfg.solver_tol;
      solver.init_mode = cfg.init_mode;
      solver.shared_init = shared_init;
      solver.seed = mix_seed(seed, 0xc11e47ULL + client.client_id);
      estimates.push_back(solve_client(client, solver));
    }

    AggregationOptions opts;
    opts.kmeans_restarts = cfg.kmeans_restarts;
    opts.seed = mix_seed(seed, 0xa66ULL);

    const auto stage_start = clock::now();
    const ClusteredPool stage = build_clustered_pool(estimates, opts);
    const double stage_ms =
        std::chrono::duration<double, std::milli>(clock::now() - stage_start)
            .count();

    const auto gm_start = clock::now();
    const AggregationResult rf = aggregate_gm(stage, opts);
    const double gm_ms =
        std::chrono::duration<double, std::milli>(clock::now() - gm_start)
            .count();

    const TheoryReport report =
        analyze_trial(stage, rf, scenario.mixing.entries, cfg.lemma34_p);

    for (MethodTag tag : cfg.methods) {
      TrialRow row = base_row(tag);
      const auto method_start = clock::now();
      AggregationResult agg;
      switch (tag) {
        case MethodTag::kRfIca:
          agg = rf;
          row.runtime_ms = stage_ms + gm_ms;
          break;
        case MethodTag::kFicaCenters:
          agg = aggregate_centroids(stage);
          row.runtime_ms =
              stage_ms + std::chrono::duration<double, std::milli>(
                             clock::now() - method_start)
                             .count();
          break;
        case MethodTag::kSimpleMean:
          agg = simple_aggregate(estimates, SimpleMode::kMean, opts);
          row.runtime_ms = std::chrono::duration<double, std::milli>(
                               clock::now() - method_start)
                               .count();
          break;
        case MethodTag::kSimpleMedian:
          agg = simple_aggregate(estimates, SimpleMode::kMedian, opts);
          row.runtime_ms = std::chrono::duration<double, std::milli>(
                               clock::now() - method_start)
                               .count();
          break;
      }
      row.frob_error =
          signed_perm_distance(agg.A_bar, scenario.mixing.entries).first;
      row.eps_total = report.eps_total;
      row.delta = report.delta;
      row.snr_ok = report.snr_condition_holds;
      row.lemma31_ok = report.lemma31_center_ok && report.lemma31_srate_ok;
      row.lemma33_ok = report.lemma33_ok;
      row.lemma34_ok = report.lemma34_ok;
      row.thm35_ok = report.thm35_ok;
      row.thm35_bound = report.thm35_bound;
      rows.push_back(std::move(row));
    }
  } catch (const std::exception& err) {
    rows.clear();
    for (MethodTag tag : cfg.methods) {
      TrialRow row = base_row(tag);
      row.failed = true;
      row.frob_error = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(std::move(row));
    }
    std::fprintf(stderr, "warning: trial %d (K=%d, f=%g, nc=%lld) failed: %s\n",
                 trial_index, cell.K, cell.corrupt_fraction,
                 static_cast<long long>(cell.corrupt_n), err.what());
  }
  return rows;
}

int thread_budget() {
  if (const char* env = std::getenv("RFICA_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  SweepResult result;
  result.config = cfg;

  std::vector<SweepCell> cells;
  for (int K : cfg.K_list) {
    for (std::int64_t nc : cfg.corrupt_n_list) {
      for (double f : cfg.corrupt_fraction_list) {
        cells.push_back(SweepCell{K, nc, f});
      }
    }
  }

  const std::size_t total_tasks = cells.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialRow>> per_task(total_tasks);
  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(thread_budget(), static_cast<int>(total_tasks)));

  auto work = [&]() {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total_tasks) break;
      const std::size_t cell_idx = task / cfg.trials;
      const int trial = static_cast<int>(task % cfg.trials);
      per_task[task] = run_trial(cfg, cells[cell_idx], trial);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (MethodTag tag : cfg.methods) {
      const std::string name = method_name(tag);
      double sum = 0.0, sum_sq = 0.0;
      int count = 0;
      for (int t = 0; t < cfg.trials; ++t) {
        const auto& rows = per_task[c * cfg.trials + t];
        for (const auto& row : rows) {
          if (row.method == name && !row.failed) {
            sum += row.frob_error;
            sum_sq += row.frob_error * row.frob_error;
            ++count;
          }
        }
      }
      CellStats stats;
      stats.cell = cells[c];
      stats.method = name;
      stats.count = count;
      if (count > 0) {
        stats.mean = sum / count;
        if (count > 1) {
          const double var =
              std::max(0.0, (sum_sq - sum * sum / count) / (count - 1));
          stats.stderr_mean = std::sqrt(var / count);
        }
      } else {
        stats.mean = std::numeric_limits<double>::quiet_NaN();
        stats.stderr_mean = std::numeric_limits<double>::quiet_NaN();
      }
      result.stats.push_back(std::move(stats));
    }
  }

  // Deterministic order: cell, trial, method.
  for (auto& rows : per_task) {
    for (auto& row : rows) {
      if (row.failed) ++result.failures;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string csv_header() {
  return "method,K,corrupt_fraction,corrupt_n,trial,seed,frob_error,runtime_ms,"
         "eps_total,delta,snr_ok,lemma31_ok,lemma33_ok,lemma34_ok,thm35_ok,"
         "thm35_bound";
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write CSV: " + path);
  }
  out << csv_header() << "\n";
  for (const auto& row : result.rows) {
    out << row.method << ',' << row.K << ','
        << format_double(row.corrupt_fraction) << ',' << row.corrupt_n << ','
        << row.trial << ',' << row.seed << ',' << format_double(row.frob_error)
        << ',' << format_double(row.runtime_ms) << ','
        << format_double(row.eps_total) << ',' << format_double(row.delta)
        << ',' << (row.snr_ok ? 1 : 0) << ',' << (row.lemma31_ok ? 1 : 0) << ','
        << (row.lemma33_ok ? 1 : 0) << ',' << (row.lemma34_ok ? 1 : 0) << ','
        << (row.thm35_ok ? 1 : 0) << ',' << format_double(row.thm35_bound)
        << "\n";
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

namespace {

template <typename T>
T panel_default(const std::vector<T>& values, T paper_default) {
  for (const T& v : values) {
    if (v == paper_default) return paper_default;
  }
  return values.front();
}

}  // namespace

std::vector<std::string> emit_plot_data(const SweepResult& result,
                                        const std::string& base_path) {
  const auto& cfg = result.config;
  const int default_K = panel_default(cfg.K_list, 30);
  const std::int64_t default_nc = panel_default<std::int64_t>(cfg.corrupt_n_list, 300);
  double default_f = cfg.corrupt_fraction_list.front();
  for (double f : cfg.corrupt_fraction_list) {
    if (std::abs(f - 0.1) < 1e-12) default_f = f;
  }

  struct Panel {
    std::string axis;
    bool active;
  };
  const std::vector<Panel> panels = {
      {"K", cfg.K_list.size() > 1},
      {"corrupt_n", cfg.corrupt_n_list.size() > 1},
      {"corrupt_fraction", cfg.corrupt_fraction_list.size() > 1},
  };

  std::vector<std::string> written;
  for (const auto& panel : panels) {
    if (!panel.active) continue;
    const std::string path = base_path + "_panel_" + panel.axis + ".csv";
    std::ofstream out(path);
    if (!out) {
      throw std::runtime_error("cannot write plot data: " + path);
    }
    out << "x,method,mean,stderr\n";
    for (const auto& stats : result.stats) {
      double x = 0.0;
      bool on_panel = false;
      if (panel.axis == "K") {
        on_panel = stats.cell.corrupt_n == default_nc &&
                   std::abs(stats.cell.corrupt_fraction - default_f) < 1e-12;
        x = stats.cell.K;
      } else if (panel.axis == "corrupt_n") {
        on_panel = stats.cell.K == default_K &&
                   std::abs(stats.cell.corrupt_fraction - default_f) < 1e-12;
        x = static_cast<double>(stats.cell.corrupt_n);
      } else {
        on_panel = stats.cell.K == default_K && stats.cell.corrupt_n == default_nc;
        x = stats.cell.corrupt_fraction;
      }
      if (!on_panel) continue;
      out << format_double(x) << ',' << stats.method << ','
          << format_double(stats.mean) << ',' << format_double(stats.stderr_mean)
          << "\n";
    }
    written.push_back(path);
  }
  return written;
}

namespace {

void write_block(std::ofstream& out, const char magic[8], std::uint64_t r,
                 std::uint64_t n, const Matrix& m) {
  out.write(magic, 8);
  out.write(reinterpret_cast<const char*>(&r), sizeof(r));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  // Eigen stores column-major by default; dump the buffer directly.
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

// square_payload: estimates store an r x r matrix while the header's n field
// carries the sample count; datasets store the full r x n matrix.
Matrix read_block(std::ifstream& in, const char magic[8], std::uint64_t* r_out,
                  std::uint64_t* n_out, bool square_payload,
                  const std::string& path) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) {
    throw std::runtime_error("bad magic in " + path);
  }
  std::uint64_t r = 0, n = 0;
  in.read(reinterpret_cast<char*>(&r), sizeof(r));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || r == 0 || r > (1u << 20)) {
    throw std::runtime_error("bad header in " + path);
  }
  const std::uint64_t cols = square_payload ? r : n;
  Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) {
    throw std::runtime_error("truncated data in " + path);
  }
  *r_out = r;
  *n_out = n;
  return m;
}

}  // namespace

void save_estimate(const LocalEstimate& est, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write estimate: " + path);
  write_block(out, kEstimateMagic, static_cast<std::uint64_t>(est.A_tilde.rows()),
              static_cast<std::uint64_t>(est.n_k), est.A_tilde);
  if (!out) throw std::runtime_error("write failed: " + path);
}

LocalEstimate load_estimate(const std::string& path, int client_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open estimate: " + path);
  std::uint64_t r = 0, n_k = 0;
  LocalEstimate est;
  est.A_tilde =
      read_block(in, kEstimateMagic, &r, &n_k, /*square_payload=*/true, path);
  est.client_id = client_id;
  est.n_k = static_cast<std::int64_t>(n_k);
  est.converged = true;
  return est;
}

void save_dataset(const ClientDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  write_block(out, kDatasetMagic,
              static_cast<std::uint64_t>(ds.observations.rows()),
              static_cast<std::uint64_t>(ds.observations.cols()),
              ds.observations);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ClientDataset load_dataset(const std::string& path, int client_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::uint64_t r = 0, n = 0;
  ClientDataset ds;
  ds.observations =
      read_block(in, kDatasetMagic, &r, &n, /*square_payload=*/false, path);
  ds.client_id = client_id;
  ds.n_k = static_cast<std::int64_t>(n);
  return ds;
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix: " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& item : split_list(line)) row.push_back(std::stod(item));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty matrix file: " + path);
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw std::runtime_error("ragged matrix file: " + path);
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace rfica
