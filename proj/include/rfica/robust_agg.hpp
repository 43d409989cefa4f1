#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfica/alignment.hpp"
#include "rfica/types.hpp"

namespace rfica {

// p-th sample quantile: smallest minimizer of the pinball objective
// sum_i { |x_i - q| + (2p - 1) (x_i - q) }. Always one of the data values.
double sample_quantile(std::span<const double> values, double p);

// Weiszfeld iteration with the modified update at data points (first-order
// optimality test, then a step along the descent direction). Initialized at
// the coordinate-wise median.
GMResult geometric_median(const std::vector<Vector>& points,
                          double tol = 1e-10, int max_iters = 1000);

double gm_objective(const Vector& y, const std::vector<Vector>& points);

// Smallest value of (2p / (2p - 1)) * Q(p; errors) over p in (1/2, 1]. The
// quantile is a step function of p, so scanning its breakpoints is exact.
double gm_error_bound(std::span<const double> errors);

struct AggregationOptions {
  BenchmarkStrategy benchmark_strategy = BenchmarkStrategy::kLargestN;
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
  double gm_tol = 1e-10;
  int gm_max_iters = 1000;
};

// Shared first stage: benchmark choice, sign alignment, pooling, k-means.
struct ClusteredPool {
  int benchmark_id = -1;
  std::vector<LocalEstimate> aligned;
  AlignmentReport report;
  AtomPool pool;
  ClusterModel clusters;
};

ClusteredPool build_clustered_pool(const std::vector<LocalEstimate>& estimates,
                                   const AggregationOptions& opts);

// Second stage on an existing pool: geometric median or centroid per cluster.
AggregationResult aggregate_gm(const ClusteredPool& stage,
                               const AggregationOptions& opts = {});
AggregationResult aggregate_centroids(const ClusteredPool& stage);

// Full pipelines.
AggregationResult rf_ica(const std::vector<LocalEstimate>& estimates,
                         const AggregationOptions& opts = {});
AggregationResult fica_centers(const std::vector<LocalEstimate>& estimates,
                               const AggregationOptions& opts = {});

enum class SimpleMode { kMean, kMedian };

// Column-slot mean or geometric median after sign alignment only.
AggregationResult simple_aggregate(const std::vector<LocalEstimate>& estimates,
                                   SimpleMode mode,
                                   const AggregationOptions& opts = {});

}  // namespace rfica
