#include "rfica/clustering.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "rfica/rng.hpp"

namespace rfica {

AtomPool pool_atoms(const std::vector<LocalEstimate>& aligned) {
  if (aligned.empty()) {
    throw std::invalid_argument("pool_atoms: no estimates");
  }
  AtomPool pool;
  for (const auto& est : aligned) {
    if (est.failed) {
      pool.excluded_clients.push_back(est.client_id);
      std::cerr << "warning: excluding failed estimate from client "
                << est.client_id << " (" << est.fail_reason << ")\n";
      continue;
    }
    const int r = static_cast<int>(est.A_tilde.cols());
    for (int i = 0; i < r; ++i) {
      pool.atoms.push_back(Atom{est.client_id, i, est.A_tilde.col(i)});
    }
  }
  if (pool.atoms.empty()) {
    throw std::invalid_argument("pool_atoms: every estimate failed");
  }
  return pool;
}

double kmeans_objective(const AtomPool& pool, const std::vector<int>& labels,
                        const std::vector<Vector>& centroids) {
  double total = 0.0;
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    total += (pool.atoms[idx].value - centroids[labels[idx]]).squaredNorm();
  }
  return total;
}

namespace {

struct LloydRun {
  std::vector<Vector> centroids;
  std::vector<int> labels;
  double objective = std::numeric_limits<double>::infinity();
};

std::vector<Vector> seed_plus_plus(const AtomPool& pool, int r, Rng& rng) {
  const std::size_t m = pool.atoms.size();
  std::vector<Vector> centers;
  centers.reserve(r);
  centers.push_back(pool.atoms[rng.next_index(m)].value);

  std::vector<double> dist2(m, 0.0);
  while (static_cast<int>(centers.size()) < r) {
    double total = 0.0;
    for (std::size_t idx = 0; idx < m; ++idx) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) {
        best = std::min(best, (pool.atoms[idx].value - c).squaredNorm());
      }
      dist2[idx] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.next_uniform() * total;
      double cum = 0.0;
      pick = m - 1;
      for (std::size_t idx = 0; idx < m; ++idx) {
        cum += dist2[idx];
        if (cum >= target) {
          pick = idx;
          break;
        }
      }
    } else {
      // All remaining mass is zero (duplicated points); spread deterministically.
      pick = centers.size() % m;
    }
    centers.push_back(pool.atoms[pick].value);
  }
  return centers;
}

void assign_labels(const AtomPool& pool, const std::vector<Vector>& centroids,
                   std::vector<int>& labels) {
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(centroids.size()); ++a) {
      const double d = (pool.atoms[idx].value - centroids[a]).squaredNorm();
      if (d < best_d) {  // ties keep the smallest label
        best_d = d;
        best = a;
      }
    }
    labels[idx] = best;
  }
}

// Moves the atom farthest from its assigned centroid into the empty cluster.
// Returns false when no donor exists (all atoms coincide with centroids).
bool repair_empty_cluster(const AtomPool& pool,
                          std::vector<Vector>& centroids,
                          std::vector<int>& labels, int empty_label) {
  double worst = 0.0;
  std::ptrdiff_t donor = -1;
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    const double d = (pool.atoms[idx].value - centroids[labels[idx]]).squaredNorm();
    if (d > worst) {
      worst = d;
      donor = static_cast<std::ptrdiff_t>(idx);
    }
  }
  if (donor < 0) return false;
  centroids[empty_label] = pool.atoms[donor].value;
  labels[donor] = empty_label;
  return true;
}

LloydRun lloyd(const AtomPool& pool, int r, Rng& rng, int max_iters) {
  const std::size_t m = pool.atoms.size();
  LloydRun run;
  run.centroids = seed_plus_plus(pool, r, rng);
  run.labels.assign(m, 0);
  assign_labels(pool, run.centroids, run.labels);

  double prev_objective = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Means per cluster.
    std::vector<Vector> means(r, Vector::Zero(pool.atoms.front().value.size()));
    std::vector<int> counts(r, 0);
    for (std::size_t idx = 0; idx < m; ++idx) {
      means[run.labels[idx]] += pool.atoms[idx].value;
      ++counts[run.labels[idx]];
    }
    for (int a = 0; a < r; ++a) {
      if (counts[a] > 0) {
        run.centroids[a] = means[a] / static_cast<double>(counts[a]);
      }
    }
    for (int a = 0; a < r; ++a) {
      if (counts[a] == 0 &&
          !repair_empty_cluster(pool, run.centroids, run.labels, a)) {
        break;
      }
    }

    std::vector<int> next_labels(m, 0);
    assign_labels(pool, run.centroids, next_labels);
    const double objective = kmeans_objective(pool, next_labels, run.centroids);
    if (objective > prev_objective + 1e-9 * (1.0 + prev_objective)) {
      throw std::logic_error("kmeans: objective increased during Lloyd's");
    }
    prev_objective = objective;
    const bool stable = next_labels == run.labels;
    run.labels = std::move(next_labels);
    if (stable) break;
  }

  // Recompute means so the centroid invariant holds exactly for the final labels.
  std::vector<Vector> means(r, Vector::Zero(pool.atoms.front().value.size()));
  std::vector<int> counts(r, 0);
  for (std::size_t idx = 0; idx < m; ++idx) {
    means[run.labels[idx]] += pool.atoms[idx].value;
    ++counts[run.labels[idx]];
  }
  for (int a = 0; a < r; ++a) {
    if (counts[a] > 0) {
      run.centroids[a] = means[a] / static_cast<double>(counts[a]);
    }
  }
  run.objective = kmeans_objective(pool, run.labels, run.centroids);
  return run;
}

}  // namespace

ClusterModel kmeans(const AtomPool& pool, int r, int restarts,
                    std::uint64_t seed) {
  if (static_cast<int>(pool.atoms.size()) < r) {
    throw std::invalid_argument("kmeans: fewer atoms than clusters");
  }
  if (restarts < 1) {
    throw std::invalid_argument("kmeans: restarts must be positive");
  }
  constexpr int kMaxLloydIters = 300;

  LloydRun best;
  for (int t = 0; t < restarts; ++t) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    LloydRun run = lloyd(pool, r, rng, kMaxLloydIters);
    if (run.objective < best.objective) {
      best = std::move(run);
    }
  }

  ClusterModel model;
  model.centroids = std::move(best.centroids);
  model.labels = std::move(best.labels);
  model.objective = best.objective;
  model.restarts_run = restarts;
  return model;
}

double approximation_ratio(const ClusterModel& model,
                           double reference_objective) {
  if (reference_objective == 0.0) {
    return model.objective == 0.0
               ? 1.0
               : std::numeric_limits<double>::infinity();
  }
  return model.objective / reference_objective;
}

}  // namespace rfica
