#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rfica/alignment.hpp"
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

// A_star * P for the signed permutation (perm, signs): column i of the result
// is signs[i] * A_star.col(perm[i]).
Matrix apply_signed_perm(const Matrix& A, const std::vector<int>& perm,
                         const std::vector<int>& signs) {
  Matrix out(A.rows(), A.cols());
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) {
    out.col(i) = static_cast<double>(signs[i]) * A.col(perm[i]);
  }
  return out;
}

// Exhaustive minimum of ||A_hat - A_star P||_F over all signed permutations.
double brute_force_signed_distance(const Matrix& A_hat, const Matrix& A_star) {
  const int r = static_cast<int>(A_hat.cols());
  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    for (int mask = 0; mask < (1 << r); ++mask) {
      std::vector<int> signs(r);
      for (int i = 0; i < r; ++i) signs[i] = (mask >> i) & 1 ? -1 : 1;
      best = std::min(best,
                      (A_hat - apply_signed_perm(A_star, perm, signs)).norm());
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Matrix random_matrix(int r, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) m(i, j) = rng.next_normal();
  }
  return m;
}

int brute_force_min_mismatches(const std::vector<int>& est,
                               const std::vector<int>& truth, int r) {
  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  int best = static_cast<int>(est.size()) + 1;
  do {
    best = std::min(best, count_mismatches(est, truth, perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("choose_benchmark picks the largest sample size") {
  const Matrix I = Matrix::Identity(3, 3);
  std::vector<LocalEstimate> estimates = {estimate_of(0, I, 5000),
                                          estimate_of(1, I, 300),
                                          estimate_of(2, I, 300)};
  CHECK(choose_benchmark(estimates, BenchmarkStrategy::kLargestN) == 0);
}

TEST_CASE("choose_benchmark breaks ties toward the smaller client id") {
  const Matrix I = Matrix::Identity(3, 3);
  std::vector<LocalEstimate> estimates = {estimate_of(0, I, 5000),
                                          estimate_of(1, I, 5000)};
  CHECK(choose_benchmark(estimates, BenchmarkStrategy::kLargestN) == 0);
}

TEST_CASE("choose_benchmark skips failed estimates and errors when all fail") {
  const Matrix I = Matrix::Identity(3, 3);
  std::vector<LocalEstimate> estimates = {estimate_of(0, I, 9000),
                                          estimate_of(1, I, 10)};
  estimates[0].failed = true;
  CHECK(choose_benchmark(estimates, BenchmarkStrategy::kLargestN) == 1);
  estimates[1].failed = true;
  CHECK_THROWS_AS(choose_benchmark(estimates, BenchmarkStrategy::kLargestN),
                  std::runtime_error);
}

TEST_CASE("best_kmeans_loss avoids a corrupted candidate") {
  // Client 0 hands in junk; aligning the pool against it makes some sign and
  // matching decisions inconsistent across clients, which splits clusters and
  // inflates the k-means objective.
  const int r = 6;
  const int K = 10;
  int good = 0;
  const int reps = 20;
  for (std::uint64_t seed = 0; seed < reps; ++seed) {
    const MixingMatrix A = generate_mixing(r, mix_seed(seed, 1));
    Rng rng(mix_seed(seed, 2));
    std::vector<LocalEstimate> estimates;
    for (int k = 0; k < K; ++k) {
      Matrix est(r, r);
      if (k == 0) {
        Rng garbage(mix_seed(seed, 333));
        for (int j = 0; j < r; ++j) {
          Vector col(r);
          for (int i = 0; i < r; ++i) col(i) = garbage.next_normal();
          est.col(j) = col.normalized();
        }
      } else {
        std::vector<int> perm(r);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        for (int i = 0; i < r; ++i) {
          Vector noise(r);
          for (int j = 0; j < r; ++j) noise(j) = rng.next_normal();
          est.col(i) = ((rng.next_bernoulli(0.5) ? 1.0 : -1.0) *
                            A.entries.col(perm[i]) +
                        0.25 * noise.normalized())
                           .normalized();
        }
      }
      estimates.push_back(estimate_of(k, est, 1000));
    }
    const int chosen = choose_benchmark(
        estimates, BenchmarkStrategy::kBestKmeansLoss, 5, mix_seed(seed, 7));
    if (chosen != 0) ++good;
  }
  CHECK(good >= 18);
}

TEST_CASE("align_signs leaves identical estimates untouched") {
  const MixingMatrix A = generate_mixing(4, 3);
  std::vector<LocalEstimate> estimates = {estimate_of(0, A.entries, 100),
                                          estimate_of(1, A.entries, 100)};
  const auto [aligned, report] = align_signs(estimates, 0);
  CHECK((aligned[1].A_tilde - A.entries).norm() == 0.0);
  for (int sign : report.chosen_signs[1]) CHECK(sign == 1);
}

TEST_CASE("align_signs flips exactly the negated column") {
  const MixingMatrix A = generate_mixing(4, 5);
  Matrix flipped = A.entries;
  flipped.col(0) *= -1.0;
  std::vector<LocalEstimate> estimates = {estimate_of(0, A.entries, 100),
                                          estimate_of(1, flipped, 100)};
  const auto [aligned, report] = align_signs(estimates, 0);
  CHECK((aligned[1].A_tilde - A.entries).norm() <= 1e-14);
  CHECK(report.chosen_signs[1][0] == -1);
  for (int i = 1; i < 4; ++i) CHECK(report.chosen_signs[1][i] == 1);
}

TEST_CASE("align_signs resolves every signed permutation to positive signs") {
  // Enumerate all signed permutations at r = 3: alignment against the clean
  // benchmark must recover the permutation with all-positive signs.
  const int r = 3;
  const MixingMatrix A = generate_mixing(r, 8);
  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    for (int mask = 0; mask < (1 << r); ++mask) {
      std::vector<int> signs(r);
      for (int i = 0; i < r; ++i) signs[i] = (mask >> i) & 1 ? -1 : 1;
      const Matrix scrambled = apply_signed_perm(A.entries, perm, signs);
      std::vector<LocalEstimate> estimates = {estimate_of(0, A.entries, 10),
                                              estimate_of(1, scrambled, 10)};
      const auto [aligned, report] = align_signs(estimates, 0);
      std::vector<int> plus(r, 1);
      const Matrix expected = apply_signed_perm(A.entries, perm, plus);
      CHECK((aligned[1].A_tilde - expected).norm() <= 1e-12);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("align_signs is idempotent") {
  const MixingMatrix A = generate_mixing(5, 12);
  std::vector<LocalEstimate> estimates;
  for (int k = 0; k < 4; ++k) {
    estimates.push_back(
        estimate_of(k, A.entries + 0.05 * random_matrix(5, 40 + k), 100));
  }
  const auto [once, report1] = align_signs(estimates, 0);
  const auto [twice, report2] = align_signs(once, 0);
  for (int k = 0; k < 4; ++k) {
    CHECK(once[k].A_tilde == twice[k].A_tilde);
  }
}

TEST_CASE("align_signs flags zero-norm columns and keeps them") {
  const MixingMatrix A = generate_mixing(3, 2);
  Matrix broken = A.entries;
  broken.col(1).setZero();
  std::vector<LocalEstimate> estimates = {estimate_of(0, A.entries, 10),
                                          estimate_of(1, broken, 10)};
  const auto [aligned, report] = align_signs(estimates, 0);
  CHECK(report.zero_norm_flags[1] == std::vector<int>{1});
  CHECK(aligned[1].A_tilde.col(1).norm() == 0.0);
}

TEST_CASE("signed_perm_distance trivial cases") {
  const MixingMatrix A = generate_mixing(4, 20);
  const auto [zero, P] = signed_perm_distance(A.entries, A.entries);
  CHECK(zero == 0.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(P.perm[i] == i);
    CHECK(P.signs[i] == 1);
  }

  Rng rng(33);
  std::vector<int> perm = {2, 0, 3, 1};
  std::vector<int> signs = {-1, 1, -1, 1};
  const Matrix scrambled = apply_signed_perm(A.entries, perm, signs);
  CHECK(signed_perm_distance(scrambled, A.entries).first <= 1e-12);
}

TEST_CASE("signed_perm_distance matches exhaustive enumeration") {
  for (int r = 2; r <= 4; ++r) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const Matrix A_hat = random_matrix(r, 500 + seed);
      const Matrix A_star = random_matrix(r, 800 + seed);
      const double solver = signed_perm_distance(A_hat, A_star).first;
      const double brute = brute_force_signed_distance(A_hat, A_star);
      CHECK(std::abs(solver - brute) <= 1e-10);
    }
  }
}

TEST_CASE("signed_perm_distance is invariant under signed permutations") {
  const int r = 4;
  const Matrix A_hat = random_matrix(r, 1);
  const Matrix A_star = random_matrix(r, 2);
  const double base = signed_perm_distance(A_hat, A_star).first;
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> perm(r);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> signs(r);
    for (auto& s : signs) s = rng.next_bernoulli(0.5) ? 1 : -1;
    const Matrix scrambled = apply_signed_perm(A_hat, perm, signs);
    CHECK(signed_perm_distance(scrambled, A_star).first ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("signed_perm_distance rejects mismatched shapes") {
  CHECK_THROWS_AS(signed_perm_distance(Matrix::Identity(3, 3),
                                       Matrix::Identity(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("best_label_permutation identity and cyclic shifts") {
  std::vector<int> truth = {0, 1, 2, 0, 1, 2};
  CHECK(best_label_permutation(truth, truth, 3) == std::vector<int>{0, 1, 2});
  CHECK(count_mismatches(truth, truth, {0, 1, 2}) == 0);

  std::vector<int> shifted;
  for (int v : truth) shifted.push_back((v + 1) % 3);
  const auto perm = best_label_permutation(shifted, truth, 3);
  CHECK(count_mismatches(shifted, truth, perm) == 0);
  CHECK(perm == std::vector<int>{2, 0, 1});
}

TEST_CASE("best_label_permutation matches brute force") {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const int r = 3;
    std::vector<int> est(30), truth(30);
    for (int i = 0; i < 30; ++i) {
      est[i] = static_cast<int>(rng.next_index(r));
      truth[i] = static_cast<int>(rng.next_index(r));
    }
    const auto perm = best_label_permutation(est, truth, r);
    CHECK(count_mismatches(est, truth, perm) ==
          brute_force_min_mismatches(est, truth, r));
  }
}

TEST_CASE("best_label_permutation picks the lexicographically smallest tie") {
  // Both estimated labels point at true cluster 0: the identity and the swap
  // each leave one mismatch, and the identity is lexicographically smaller.
  std::vector<int> est = {0, 1};
  std::vector<int> truth = {0, 0};
  const auto perm = best_label_permutation(est, truth, 2);
  CHECK(count_mismatches(est, truth, perm) == 1);
  CHECK(perm == std::vector<int>{0, 1});
}

TEST_CASE("best_label_permutation validates labels") {
  CHECK_THROWS_AS(best_label_permutation({0, 3}, {0, 1}, 3),
                  std::invalid_argument);
}

TEST_CASE("misclustering_rates counts per true cluster") {
  const int r = 3;
  const int K = 30;
  std::vector<int> truth, est;
  for (int k = 0; k < K; ++k) {
    for (int a = 0; a < r; ++a) {
      truth.push_back(a);
      est.push_back(a);
    }
  }
  auto rates = misclustering_rates(est, truth, K, r);
  for (double s : rates) CHECK(s == 0.0);

  // Move one point of true cluster 0 into estimated cluster 1.
  est[0] = 1;
  rates = misclustering_rates(est, truth, K, r);
  CHECK(rates[0] == doctest::Approx(1.0 / 30.0));
  CHECK(rates[1] == 0.0);
  CHECK(rates[2] == 0.0);
}

TEST_CASE("misclustering_rates matches a direct double loop") {
  Rng rng(21);
  const int r = 4;
  const int K = 8;
  std::vector<int> truth, est;
  for (int k = 0; k < K; ++k) {
    for (int a = 0; a < r; ++a) {
      truth.push_back(a);
      est.push_back(static_cast<int>(rng.next_index(r)));
    }
  }
  const auto rates = misclustering_rates(est, truth, K, r);
  const auto perm = best_label_permutation(est, truth, r);
  for (int a = 0; a < r; ++a) {
    int count = 0;
    for (std::size_t idx = 0; idx < truth.size(); ++idx) {
      if (truth[idx] == a && perm[est[idx]] != a) ++count;
    }
    CHECK(rates[a] == doctest::Approx(static_cast<double>(count) / K));
  }
}
