#pragma once

#include <cstdint>
#include <vector>

#include "rfica/types.hpp"

namespace rfica {

// Flattens the columns of sign-aligned estimates into one pool with
// provenance. Failed estimates are skipped and recorded.
AtomPool pool_atoms(const std::vector<LocalEstimate>& aligned);

// Lloyd's iteration with k-means++ seeding, best of `restarts` runs by
// objective. Empty clusters are repaired by reseeding at the point farthest
// from its assigned centroid. Deterministic given the seed.
ClusterModel kmeans(const AtomPool& pool, int r, int restarts,
                    std::uint64_t seed);

// Objective of the model divided by a reference objective (1 when both are
// zero, +inf when only the reference is zero).
double approximation_ratio(const ClusterModel& model, double reference_objective);

double kmeans_objective(const AtomPool& pool, const std::vector<int>& labels,
                        const std::vector<Vector>& centroids);

}  // namespace rfica
