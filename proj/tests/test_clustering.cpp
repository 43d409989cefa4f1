#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rfica/alignment.hpp"
#include "rfica/clustering.hpp"
#include "rfica/model_gen.hpp"
#include "rfica/rng.hpp"

using namespace rfica;

namespace {

LocalEstimate estimate_of(int id, const Matrix& A, std::int64_t n) {
  LocalEstimate est;
  est.client_id = id;
  est.A_tilde = A;
  est.n_k = n;
  est.converged = true;
  return est;
}

AtomPool pool_from_rows(const Matrix& rows) {
  AtomPool pool;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    pool.atoms.push_back(
        Atom{static_cast<int>(i), 0, rows.row(i).transpose()});
  }
  return pool;
}

// Exhaustive k-means optimum over every label assignment (centroids are the
// cluster means, so labels determine the objective).
double brute_force_kmeans(const AtomPool& pool, int r) {
  const int m = static_cast<int>(pool.atoms.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> labels(m, 0);
  const long long total = static_cast<long long>(std::pow(r, m));
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    for (int i = 0; i < m; ++i) {
      labels[i] = static_cast<int>(c % r);
      c /= r;
    }
    std::vector<Vector> centroids(r,
                                  Vector::Zero(pool.atoms.front().value.size()));
    std::vector<int> counts(r, 0);
    for (int i = 0; i < m; ++i) {
      centroids[labels[i]] += pool.atoms[i].value;
      ++counts[labels[i]];
    }
    for (int a = 0; a < r; ++a) {
      if (counts[a] > 0) centroids[a] /= counts[a];
    }
    best = std::min(best, kmeans_objective(pool, labels, centroids));
  }
  return best;
}

}  // namespace

TEST_CASE("pool_atoms flattens columns with provenance") {
  const MixingMatrix A = generate_mixing(10, 4);
  std::vector<LocalEstimate> estimates;
  for (int k = 0; k < 30; ++k) estimates.push_back(estimate_of(k, A.entries, 50));
  const AtomPool pool = pool_atoms(estimates);
  CHECK(pool.atoms.size() == 300);
  CHECK(pool.excluded_clients.empty());

  // Provenance round-trip is bit-exact.
  for (const auto& atom : pool.atoms) {
    CHECK(atom.value ==
          estimates[atom.client_id].A_tilde.col(atom.column_index));
  }
}

TEST_CASE("pool_atoms skips failed estimates with a record") {
  const MixingMatrix A = generate_mixing(10, 4);
  std::vector<LocalEstimate> estimates;
  for (int k = 0; k < 30; ++k) estimates.push_back(estimate_of(k, A.entries, 50));
  estimates[7].failed = true;
  const AtomPool pool = pool_atoms(estimates);
  CHECK(pool.atoms.size() == 290);
  CHECK(pool.excluded_clients == std::vector<int>{7});
}

TEST_CASE("pool_atoms rejects empty input") {
  CHECK_THROWS_AS(pool_atoms({}), std::invalid_argument);
}

TEST_CASE("kmeans nails exactly repeated orthonormal points") {
  const int r = 4;
  const int K = 6;
  const MixingMatrix A = generate_mixing(r, 9);
  AtomPool pool;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < r; ++i) {
      pool.atoms.push_back(Atom{k, i, A.entries.col(i)});
    }
  }
  const ClusterModel model = kmeans(pool, r, 5, 3);
  CHECK(model.objective <= 1e-20);
  // Each cluster holds exactly K copies of one column.
  std::vector<int> counts(r, 0);
  for (int label : model.labels) ++counts[label];
  for (int c : counts) CHECK(c == K);
}

TEST_CASE("kmeans on noiselessly permuted estimates recovers the partition") {
  const int r = 5;
  const int K = 8;
  const MixingMatrix A = generate_mixing(r, 30);
  Rng rng(77);
  std::vector<LocalEstimate> estimates;
  std::vector<int> truth;  // true column per atom in pool order
  for (int k = 0; k < K; ++k) {
    std::vector<int> perm(r);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix M(r, r);
    for (int i = 0; i < r; ++i) {
      M.col(i) = A.entries.col(perm[i]);
      truth.push_back(perm[i]);
    }
    estimates.push_back(estimate_of(k, M, 100));
  }
  const AtomPool pool = pool_atoms(estimates);
  const ClusterModel model = kmeans(pool, r, 10, 5);
  CHECK(model.objective <= 1e-20);
  const auto rates = misclustering_rates(model.labels, truth, K, r);
  for (double s : rates) CHECK(s == 0.0);
}

TEST_CASE("kmeans matches brute force on a tiny planar instance") {
  Matrix rows(6, 2);
  rows << 0.0, 0.0,
          0.1, -0.05,
          -0.07, 0.02,
          3.0, 3.0,
          3.1, 2.9,
          2.95, 3.05;
  const AtomPool pool = pool_from_rows(rows);
  const ClusterModel model = kmeans(pool, 2, 8, 11);
  const double brute = brute_force_kmeans(pool, 2);
  CHECK(model.objective == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("kmeans rejects undersized pools and bad restarts") {
  Matrix rows(2, 2);
  rows << 0.0, 0.0, 1.0, 1.0;
  const AtomPool pool = pool_from_rows(rows);
  CHECK_THROWS_AS(kmeans(pool, 3, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(pool, 2, 0, 0), std::invalid_argument);
}

TEST_CASE("kmeans centroids equal their cluster means and objective adds up") {
  Rng rng(15);
  Matrix rows(40, 3);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) rows(i, j) = rng.next_normal();
  }
  const AtomPool pool = pool_from_rows(rows);
  const ClusterModel model = kmeans(pool, 4, 6, 2);

  std::vector<Vector> means(4, Vector::Zero(3));
  std::vector<int> counts(4, 0);
  double objective = 0.0;
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    means[model.labels[idx]] += pool.atoms[idx].value;
    ++counts[model.labels[idx]];
  }
  for (int a = 0; a < 4; ++a) {
    if (counts[a] == 0) continue;
    means[a] /= counts[a];
    CHECK((means[a] - model.centroids[a]).norm() <= 1e-9);
  }
  for (std::size_t idx = 0; idx < pool.atoms.size(); ++idx) {
    objective +=
        (pool.atoms[idx].value - model.centroids[model.labels[idx]]).squaredNorm();
  }
  CHECK(std::abs(objective - model.objective) <= 1e-9 * (1.0 + objective));
}

TEST_CASE("kmeans objective is invariant under relabeling clusters") {
  Rng rng(25);
  Matrix rows(20, 2);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 2; ++j) rows(i, j) = rng.next_normal();
  }
  const AtomPool pool = pool_from_rows(rows);
  const ClusterModel model = kmeans(pool, 3, 4, 8);

  std::vector<int> relabel = {2, 0, 1};
  std::vector<int> new_labels(model.labels.size());
  std::vector<Vector> new_centroids(3, Vector::Zero(2));
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    new_labels[i] = relabel[model.labels[i]];
  }
  for (int a = 0; a < 3; ++a) new_centroids[relabel[a]] = model.centroids[a];
  CHECK(kmeans_objective(pool, new_labels, new_centroids) ==
        doctest::Approx(model.objective).epsilon(1e-15));
}

TEST_CASE("more restarts never worsen the objective") {
  Rng rng(35);
  Matrix rows(60, 4);
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 4; ++j) rows(i, j) = rng.next_normal();
  }
  const AtomPool pool = pool_from_rows(rows);
  const ClusterModel one = kmeans(pool, 6, 1, 123);
  const ClusterModel ten = kmeans(pool, 6, 10, 123);
  // Restart 0 is shared, so best-of-10 can only improve.
  CHECK(ten.objective <= one.objective + 1e-15);
  CHECK(approximation_ratio(ten, one.objective) <= 1.0 + 1e-15);
}

TEST_CASE("kmeans is deterministic given the seed") {
  Rng rng(45);
  Matrix rows(30, 3);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 3; ++j) rows(i, j) = rng.next_normal();
  }
  const AtomPool pool = pool_from_rows(rows);
  const ClusterModel a = kmeans(pool, 3, 5, 99);
  const ClusterModel b = kmeans(pool, 3, 5, 99);
  CHECK(a.labels == b.labels);
  CHECK(a.objective == b.objective);
}

TEST_CASE("approximation_ratio conventions") {
  ClusterModel model;
  model.objective = 0.0;
  CHECK(approximation_ratio(model, 0.0) == 1.0);
  model.objective = 2.0;
  CHECK(std::isinf(approximation_ratio(model, 0.0)));
  CHECK(approximation_ratio(model, 1.0) == doctest::Approx(2.0));
}
