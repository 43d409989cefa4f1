#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rfica/types.hpp"

namespace rfica {

enum class BenchmarkStrategy { kLargestN, kBestKmeansLoss };

// Picks the benchmark client. kLargestN takes the largest n_k (ties go to the
// smallest client id); kBestKmeansLoss runs the alignment + k-means pipeline
// once per candidate and keeps the candidate with the smallest objective.
int choose_benchmark(const std::vector<LocalEstimate>& estimates,
                     BenchmarkStrategy strategy, int kmeans_restarts = 10,
                     std::uint64_t seed = 0);

// Flips estimator columns so each has positive inner product with its best
// matched benchmark column (largest normalized absolute inner product).
// Benchmark columns and failed estimates are left unchanged.
std::pair<std::vector<LocalEstimate>, AlignmentReport> align_signs(
    const std::vector<LocalEstimate>& estimates, int benchmark_id);

// min over signed permutations P of ||A_hat - A_star * P||_F, solved exactly
// by assignment on per-pair sign-optimal squared distances.
std::pair<double, SignedPermutation> signed_perm_distance(const Matrix& A_hat,
                                                          const Matrix& A_star);

// Exact label permutation (estimated label -> true label) minimizing the
// number of mismatches; ties resolved to the lexicographically smallest
// permutation.
std::vector<int> best_label_permutation(const std::vector<int>& est_labels,
                                        const std::vector<int>& true_labels,
                                        int r);

int count_mismatches(const std::vector<int>& est_labels,
                     const std::vector<int>& true_labels,
                     const std::vector<int>& perm);

// Within-cluster misclustering rates s_a = #{true label a, permuted estimated
// label != a} / K under the best label permutation.
std::vector<double> misclustering_rates(const std::vector<int>& est_labels,
                                        const std::vector<int>& true_labels,
                                        int K, int r);

}  // namespace rfica
