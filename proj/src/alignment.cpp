#include "rfica/alignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfica/assignment.hpp"
#include "rfica/clustering.hpp"
#include "rfica/rng.hpp"

namespace rfica {

int choose_benchmark(const std::vector<LocalEstimate>& estimates,
                     BenchmarkStrategy strategy, int kmeans_restarts,
                     std::uint64_t seed) {
  std::vector<int> candidates;
  for (int k = 0; k < static_cast<int>(estimates.size()); ++k) {
    if (!estimates[k].failed) candidates.push_back(k);
  }
  if (candidates.empty()) {
    throw std::runtime_error("choose_benchmark: every estimate failed");
  }

  if (strategy == BenchmarkStrategy::kLargestN) {
    int best = candidates.front();
    for (int k : candidates) {
      const bool larger = estimates[k].n_k > estimates[best].n_k;
      const bool tie_smaller_id =
          estimates[k].n_k == estimates[best].n_k &&
          estimates[k].client_id < estimates[best].client_id;
      if (larger || tie_smaller_id) best = k;
    }
    return estimates[best].client_id;
  }

  // Run alignment + k-means once per candidate; smallest objective wins,
  // ties go to the smallest client id.
  const int r = static_cast<int>(estimates[candidates.front()].A_tilde.rows());
  int best = -1;
  double best_objective = std::numeric_limits<double>::infinity();
  for (int k : candidates) {
    const int candidate_id = estimates[k].client_id;
    auto [aligned, report] = align_signs(estimates, candidate_id);
    const AtomPool pool = pool_atoms(aligned);
    const ClusterModel model =
        kmeans(pool, r, kmeans_restarts,
               mix_seed(seed, static_cast<std::uint64_t>(candidate_id)));
    if (model.objective < best_objective) {
      best_objective = model.objective;
      best = candidate_id;
    }
  }
  return best;
}

std::pair<std::vector<LocalEstimate>, AlignmentReport> align_signs(
    const std::vector<LocalEstimate>& estimates, int benchmark_id) {
  const LocalEstimate* benchmark = nullptr;
  for (const auto& est : estimates) {
    if (est.client_id == benchmark_id) benchmark = &est;
  }
  if (benchmark == nullptr || benchmark->failed) {
    throw std::invalid_argument(
        "align_signs: benchmark estimate missing or failed");
  }
  const Matrix& B = benchmark->A_tilde;
  const int r = static_cast<int>(B.cols());

  std::vector<LocalEstimate> aligned = estimates;
  AlignmentReport report;
  report.benchmark_id = benchmark_id;
  report.chosen_signs.assign(estimates.size(), std::vector<int>(r, 1));
  report.matched_index.assign(estimates.size(), std::vector<int>());
  report.zero_norm_flags.assign(estimates.size(), std::vector<int>());

  for (std::size_t k = 0; k < estimates.size(); ++k) {
    auto& matched = report.matched_index[k];
    matched.resize(r);
    for (int i = 0; i < r; ++i) matched[i] = i;
    if (estimates[k].failed || estimates[k].client_id == benchmark_id) continue;

    Matrix& A = aligned[k].A_tilde;
    for (int i = 0; i < r; ++i) {
      const double col_norm = A.col(i).norm();
      if (col_norm == 0.0) {
        report.zero_norm_flags[k].push_back(i);
        continue;
      }
      int j_best = 0;
      double best_score = -1.0;
      for (int j = 0; j < r; ++j) {
        const double denom = col_norm * B.col(j).norm();
        if (denom == 0.0) continue;
        const double score = std::abs(A.col(i).dot(B.col(j))) / denom;
        if (score > best_score) {  // ties keep the smallest j
          best_score = score;
          j_best = j;
        }
      }
      matched[i] = j_best;
      if (A.col(i).dot(B.col(j_best)) < 0.0) {
        A.col(i) *= -1.0;
        report.chosen_signs[k][i] = -1;
      }
    }
  }
  return {std::move(aligned), std::move(report)};
}

std::pair<double, SignedPermutation> signed_perm_distance(
    const Matrix& A_hat, const Matrix& A_star) {
  if (A_hat.rows() != A_star.rows() || A_hat.cols() != A_star.cols() ||
      A_hat.rows() != A_hat.cols()) {
    throw std::invalid_argument("signed_perm_distance: dimension mismatch");
  }
  const int r = static_cast<int>(A_hat.cols());

  Matrix cost(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      const double plus = (A_hat.col(i) - A_star.col(j)).squaredNorm();
      const double minus = (A_hat.col(i) + A_star.col(j)).squaredNorm();
      cost(i, j) = std::min(plus, minus);
    }
  }
  const std::vector<int> perm = solve_assignment(cost);

  SignedPermutation P;
  P.perm = perm;
  P.signs.resize(r, 1);
  double total = 0.0;
  for (int i = 0; i < r; ++i) {
    const int j = perm[i];
    const double plus = (A_hat.col(i) - A_star.col(j)).squaredNorm();
    const double minus = (A_hat.col(i) + A_star.col(j)).squaredNorm();
    P.signs[i] = plus <= minus ? 1 : -1;
    total += std::min(plus, minus);
  }
  return {std::sqrt(std::max(0.0, total)), std::move(P)};
}

namespace {

void validate_labels(const std::vector<int>& labels, int r) {
  for (int v : labels) {
    if (v < 0 || v >= r) {
      throw std::invalid_argument("label out of range");
    }
  }
}

}  // namespace

int count_mismatches(const std::vector<int>& est_labels,
                     const std::vector<int>& true_labels,
                     const std::vector<int>& perm) {
  int mismatches = 0;
  for (std::size_t idx = 0; idx < est_labels.size(); ++idx) {
    if (perm[est_labels[idx]] != true_labels[idx]) ++mismatches;
  }
  return mismatches;
}

std::vector<int> best_label_permutation(const std::vector<int>& est_labels,
                                        const std::vector<int>& true_labels,
                                        int r) {
  if (est_labels.size() != true_labels.size()) {
    throw std::invalid_argument(
        "best_label_permutation: label vectors differ in length");
  }
  validate_labels(est_labels, r);
  validate_labels(true_labels, r);

  // matches(b, a) = #points with estimated label b and true label a; a
  // max-matches assignment minimizes mismatches.
  Matrix matches = Matrix::Zero(r, r);
  for (std::size_t idx = 0; idx < est_labels.size(); ++idx) {
    matches(est_labels[idx], true_labels[idx]) += 1.0;
  }
  const Matrix cost = -matches;
  const double best_total =
      assignment_cost(cost, solve_assignment(cost));

  // Fix slots in order, always trying the smallest target first, so ties
  // resolve to the lexicographically smallest permutation. Counts are
  // integers, so the equality test is exact.
  std::vector<int> perm(r, -1);
  std::vector<char> used(r, 0);
  double fixed_cost = 0.0;
  for (int b = 0; b < r; ++b) {
    for (int a = 0; a < r; ++a) {
      if (used[a]) continue;
      const int remaining = r - b - 1;
      double rest = 0.0;
      if (remaining > 0) {
        Matrix sub(remaining, remaining);
        int si = 0;
        for (int bb = b + 1; bb < r; ++bb, ++si) {
          int sj = 0;
          for (int aa = 0; aa < r; ++aa) {
            if (used[aa] || aa == a) continue;
            sub(si, sj++) = cost(bb, aa);
          }
        }
        rest = assignment_cost(sub, solve_assignment(sub));
      }
      if (fixed_cost + cost(b, a) + rest <= best_total + 0.5) {
        perm[b] = a;
        used[a] = 1;
        fixed_cost += cost(b, a);
        break;
      }
    }
  }
  return perm;
}

std::vector<double> misclustering_rates(const std::vector<int>& est_labels,
                                        const std::vector<int>& true_labels,
                                        int K, int r) {
  const std::vector<int> perm = best_label_permutation(est_labels, true_labels, r);
  std::vector<double> rates(r, 0.0);
  for (std::size_t idx = 0; idx < est_labels.size(); ++idx) {
    const int a = true_labels[idx];
    if (perm[est_labels[idx]] != a) {
      rates[a] += 1.0 / static_cast<double>(K);
    }
  }
  return rates;
}

}  // namespace rfica
