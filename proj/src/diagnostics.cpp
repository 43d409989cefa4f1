#include "rfica/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rfica/assignment.hpp"
#include "rfica/local_solver.hpp"
#include "rfica/model_gen.hpp"
#include "rfica/rng.hpp"

namespace rfica {

namespace {

// Sign-free column distance.
double column_distance(const Vector& u, const Vector& v) {
  return std::min((u - v).norm(), (u + v).norm());
}

std::vector<const LocalEstimate*> used_estimates(
    const std::vector<LocalEstimate>& estimates) {
  std::vector<const LocalEstimate*> used;
  for (const auto& est : estimates) {
    if (!est.failed) used.push_back(&est);
  }
  if (used.empty()) {
    throw std::invalid_argument("compute_epsilons: every estimate failed");
  }
  return used;
}

// Errors of the atoms in each true cluster, sorted ascending.
std::vector<std::vector<double>> true_cluster_errors(const TheoryReport& report,
                                                     int r) {
  std::vector<std::vector<double>> errors(r);
  const auto used = report.eps_per_column.rows();
  for (Eigen::Index u = 0; u < used; ++u) {
    for (int i = 0; i < r; ++i) {
      const int a = report.sigma_star[static_cast<std::size_t>(u) * r + i];
      errors[a].push_back(report.eps_per_column(u, i));
    }
  }
  for (auto& list : errors) std::sort(list.begin(), list.end());
  return errors;
}

void append_note(TheoryReport& report, const std::string& note) {
  if (!report.notes.empty()) report.notes += "; ";
  report.notes += note;
}

}  // namespace

TheoryReport compute_epsilons(const std::vector<LocalEstimate>& estimates,
                              const Matrix& A_star) {
  const auto used = used_estimates(estimates);
  const int r = static_cast<int>(A_star.cols());
  for (const auto* est : used) {
    if (est->A_tilde.rows() != A_star.rows() ||
        est->A_tilde.cols() != A_star.cols()) {
      throw std::invalid_argument("compute_epsilons: dimension mismatch");
    }
  }

  TheoryReport report;
  report.eps_per_column.resize(static_cast<Eigen::Index>(used.size()), r);
  report.sigma_star.resize(used.size() * static_cast<std::size_t>(r));

  const double K = static_cast<double>(used.size());
  report.eps_a.assign(r, 0.0);
  for (std::size_t u = 0; u < used.size(); ++u) {
    const Matrix& A = used[u]->A_tilde;
    Matrix cost(r, r);
    for (int i = 0; i < r; ++i) {
      for (int a = 0; a < r; ++a) {
        const double d = column_distance(A.col(i), A_star.col(a));
        cost(i, a) = d * d;
      }
    }
    const std::vector<int> assignment = solve_assignment(cost);
    for (int i = 0; i < r; ++i) {
      const int a = assignment[i];
      const double eps = column_distance(A.col(i), A_star.col(a));
      report.eps_per_column(static_cast<Eigen::Index>(u), i) = eps;
      report.sigma_star[u * static_cast<std::size_t>(r) + i] = a;
      report.eps_a[a] += eps * eps / K;
    }
  }
  for (double e : report.eps_a) report.eps_total += e;
  report.delta = column_separation(A_star);
  report.snr_condition_holds =
      8.0 * std::sqrt(7.0 * report.eps_total / report.delta) <= 1.0;
  return report;
}

void check_lemma31(TheoryReport& report, const ClusterModel& model,
                   const AtomPool& pool, const Matrix& A_star) {
  const int r = static_cast<int>(A_star.cols());
  const int K_used = static_cast<int>(pool.atoms.size()) / r;
  report.s_rates = misclustering_rates(model.labels, report.sigma_star, K_used, r);

  if (!report.snr_condition_holds) {
    report.lemma31_vacuous = true;
    report.lemma31_center_ok = true;
    report.lemma31_srate_ok = true;
    append_note(report, "lemma31 vacuous: SNR hypothesis fails");
    return;
  }
  report.lemma31_vacuous = false;

  Matrix dist(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      dist(i, j) = column_distance(model.centroids[i], A_star.col(j));
    }
  }
  const double center_bound = std::sqrt(7.0 * report.eps_total);
  report.lemma31_center_ok = matching_within(dist, center_bound + 1e-12);

  report.lemma31_srate_ok = true;
  for (int a = 0; a < r; ++a) {
    if (report.s_rates[a] > 16.0 * report.eps_a[a] / report.delta + 1e-12) {
      report.lemma31_srate_ok = false;
    }
  }
}

bool check_lemma34(TheoryReport& report, const ClusterModel& model,
                   const AtomPool& pool, double p) {
  const int r = static_cast<int>(model.centroids.size());
  if (!report.snr_condition_holds) {
    report.lemma34_vacuous = true;
    report.lemma34_ok = true;
    append_note(report, "lemma34 vacuous: SNR hypothesis fails");
    return true;
  }

  const auto star_errors = true_cluster_errors(report, r);
  // Estimated cluster matched to each true cluster under the best label
  // permutation.
  const std::vector<int> perm =
      best_label_permutation(model.labels, report.sigma_star, r);
  std::vector<int> inverse(r, -1);
  for (int b = 0; b < r; ++b) inverse[perm[b]] = b;

  std::vector<std::vector<double>> bar_errors(r);
  const int cols = r;
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    const auto u = idx / static_cast<std::size_t>(cols);
    const auto i = idx % static_cast<std::size_t>(cols);
    bar_errors[model.labels[idx]].push_back(
        report.eps_per_column(static_cast<Eigen::Index>(u),
                              static_cast<Eigen::Index>(i)));
  }
  for (auto& list : bar_errors) std::sort(list.begin(), list.end());

  const double pbar_floor =
      p / (1.0 + 16.0 * report.eps_total / report.delta);
  const double sqrt_delta_4 = std::sqrt(report.delta) / 4.0;

  bool any_checked = false;
  bool all_ok = true;
  for (int a = 0; a < r; ++a) {
    if (star_errors[a].empty()) continue;
    const double target = sample_quantile(star_errors[a], p);
    if (target >= sqrt_delta_4) {
      append_note(report, "lemma34 cluster " + std::to_string(a) +
                              " skipped: quantile above sqrt(delta)/4");
      continue;
    }
    any_checked = true;
    const auto& bar = bar_errors[inverse[a]];
    bool found = false;
    const int nbar = static_cast<int>(bar.size());
    for (int m = nbar; m >= 1 && !found; --m) {
      const double pbar = static_cast<double>(m) / static_cast<double>(nbar);
      if (pbar <= pbar_floor) break;  // descending; no larger pbar remains
      const double value = bar[m - 1];
      if (std::abs(value - target) <= 1e-12 * std::max(1.0, std::abs(target))) {
        found = true;
      }
    }
    if (!found) all_ok = false;
  }

  report.lemma34_vacuous = !any_checked;
  report.lemma34_ok = all_ok;
  return all_ok;
}

void check_theorem35(TheoryReport& report, const AggregationResult& rf_result,
                     const AtomPool& pool, const Matrix& A_star) {
  (void)pool;
  const int r = static_cast<int>(A_star.cols());
  if (!report.snr_condition_holds) {
    report.thm35_vacuous = true;
    report.thm35_ok = true;
    report.thm35_bound = std::numeric_limits<double>::quiet_NaN();
    append_note(report, "theorem35 vacuous: SNR hypothesis fails");
    return;
  }

  const auto star_errors = true_cluster_errors(report, r);
  const auto [dist, P] = signed_perm_distance(rf_result.A_bar, A_star);
  (void)dist;
  const double ratio = report.eps_total / report.delta;
  const double p_low = 0.5 + 8.0 * ratio;
  const double sqrt_delta_4 = std::sqrt(report.delta) / 4.0;

  bool any_checked = false;
  bool all_ok = true;
  double worst_bound = 0.0;
  for (int a = 0; a < r; ++a) {
    const int b = P.perm[a];  // true column matched to aggregate column a
    const auto& errors = star_errors[b];
    const int n = static_cast<int>(errors.size());

    // Optimal quantile over the breakpoints of Q_b inside (p_low, 1].
    double best_value = std::numeric_limits<double>::infinity();
    double best_p = -1.0;
    int best_m = -1;
    for (int m = 1; m <= n; ++m) {
      const double p = static_cast<double>(m) / static_cast<double>(n);
      if (p <= p_low) continue;
      const double candidate = 2.0 * p / (2.0 * p - 1.0) * errors[m - 1];
      if (candidate < best_value) {
        best_value = candidate;
        best_p = p;
        best_m = m;
      }
    }
    if (best_m < 0) {
      append_note(report, "theorem35 cluster " + std::to_string(b) +
                              " skipped: empty quantile interval");
      continue;
    }
    const double q_value = errors[best_m - 1];
    if (q_value >= sqrt_delta_4) {
      append_note(report, "theorem35 cluster " + std::to_string(b) +
                              " skipped: quantile above sqrt(delta)/4");
      continue;
    }
    any_checked = true;
    const double denom = 2.0 * best_p - 1.0 - 16.0 * ratio;
    const double bound = 2.0 * best_p / denom * q_value;
    worst_bound = std::max(worst_bound, bound);
    const Vector target = static_cast<double>(P.signs[a]) * A_star.col(b);
    const double actual = (rf_result.A_bar.col(a) - target).norm();
    if (actual > bound + 1e-9) all_ok = false;
  }

  report.thm35_vacuous = !any_checked;
  report.thm35_ok = all_ok;
  report.thm35_bound = any_checked
                           ? worst_bound
                           : std::numeric_limits<double>::quiet_NaN();
}

void check_lemma33(TheoryReport& report, const AggregationResult& rf_result,
                   const AtomPool& pool, const Matrix& A_star) {
  const int r = static_cast<int>(A_star.cols());
  const auto [dist, P] = signed_perm_distance(rf_result.A_bar, A_star);
  (void)dist;

  bool all_ok = true;
  for (int a = 0; a < r; ++a) {
    const Vector target = static_cast<double>(P.signs[a]) * A_star.col(P.perm[a]);
    std::vector<double> errors;
    for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
      if (rf_result.cluster_model.labels[idx] == a) {
        errors.push_back((pool.atoms[idx].value - target).norm());
      }
    }
    if (errors.empty()) continue;
    const double bound = gm_error_bound(errors);
    const double actual = (rf_result.A_bar.col(a) - target).norm();
    if (actual > bound + 1e-8 * (1.0 + bound)) all_ok = false;
  }
  report.lemma33_ok = all_ok;
}

TheoryReport analyze_trial(const ClusteredPool& stage,
                           const AggregationResult& rf_result,
                           const Matrix& A_star, double lemma34_p) {
  TheoryReport report = compute_epsilons(stage.aligned, A_star);
  check_lemma31(report, stage.clusters, stage.pool, A_star);
  check_lemma34(report, stage.clusters, stage.pool, lemma34_p);
  check_lemma33(report, rf_result, stage.pool, A_star);
  check_theorem35(report, rf_result, stage.pool, A_star);
  return report;
}

double log_log_slope(const std::vector<double>& ns,
                     const std::vector<double>& errors) {
  if (ns.size() != errors.size() || ns.size() < 2) {
    throw std::invalid_argument("log_log_slope: need matching lists, >= 2 points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double x = std::log(ns[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RateCheckResult check_corollary37_scaling(const std::vector<std::int64_t>& ns,
                                          int r, int K, int trials,
                                          std::uint64_t seed, double sparsity,
                                          int kmeans_restarts) {
  RateCheckResult result;
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      ExperimentScenario sc;
      sc.r = r;
      sc.K = K;
      sc.n_normal = ns[ni];
      sc.n_corrupt = ns[ni];
      sc.corrupt_fraction = 0.0;
      sc.sparsity = sparsity;
      sc.seed = mix_seed(seed, ni * 1000 + static_cast<std::uint64_t>(t));
      const Scenario scenario = make_scenario(sc);

      std::vector<LocalEstimate> estimates;
      estimates.reserve(scenario.clients.size());
      for (const auto& client : scenario.clients) {
        SolverConfig cfg;
        cfg.seed = mix_seed(sc.seed, 0xc11e47ULL + client.client_id);
        estimates.push_back(solve_client(client, cfg));
      }
      AggregationOptions opts;
      opts.kmeans_restarts = kmeans_restarts;
      opts.seed = mix_seed(sc.seed, 0xa66ULL);
      const AggregationResult agg = rf_ica(estimates, opts);
      total += signed_perm_distance(agg.A_bar, scenario.mixing.entries).first;
    }
    result.ns.push_back(static_cast<double>(ns[ni]));
    result.mean_errors.push_back(total / trials);
  }
  result.slope = result.ns.size() >= 2
                     ? log_log_slope(result.ns, result.mean_errors)
                     : std::numeric_limits<double>::quiet_NaN();
  return result;
}

}  // namespace rfica
