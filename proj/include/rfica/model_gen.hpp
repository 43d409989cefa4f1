#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rfica/types.hpp"

namespace rfica {

// Polar factor U * V^T of the SVD M = U * S * V^T; the closest orthogonal
// matrix to M in Frobenius norm. Throws on rank-deficient input.
Matrix nearest_orthogonal(const Matrix& M);

// Random matrix with i.i.d. standard normal entries projected onto the
// orthogonal group. Deterministic given the seed. Requires r >= 2.
MixingMatrix generate_mixing(int r, std::uint64_t seed);

// Bernoulli-Gaussian source matrix: entry = Bernoulli(sparsity) * N(0, 1).
Matrix generate_sources(int r, std::int64_t n, double sparsity,
                        std::uint64_t seed);

// Minimal squared distance between two distinct columns (2 for orthonormal
// columns).
double column_separation(const Matrix& A);

struct Scenario {
  MixingMatrix mixing;
  std::vector<ClientDataset> clients;
};

// K noiseless client datasets sharing one mixing matrix. floor(
// corrupt_fraction * K) clients, placed by a seeded shuffle, get n_corrupt
// samples; the rest get n_normal. Refuses corrupt_fraction >= 0.5.
Scenario make_scenario(const ExperimentScenario& scenario);

}  // namespace rfica
