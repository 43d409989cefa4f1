#include "rfica/robust_agg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rfica/clustering.hpp"

namespace rfica {

std::string method_name(MethodTag tag) {
  switch (tag) {
    case MethodTag::kRfIca: return "rf_ica";
    case MethodTag::kFicaCenters: return "fica_centers";
    case MethodTag::kSimpleMean: return "simple_mean";
    case MethodTag::kSimpleMedian: return "simple_median";
  }
  return "unknown";
}

double sample_quantile(std::span<const double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("sample_quantile: empty list");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("sample_quantile: p must lie in [0, 1]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // The pinball objective is piecewise linear with slope 2(j - p n) between
  // the j-th and (j+1)-th order statistics; its smallest minimizer is the
  // ceil(p n)-th order statistic.
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(p * n));
  idx = std::clamp<std::ptrdiff_t>(idx, 1, sorted.size());
  return sorted[static_cast<std::size_t>(idx - 1)];
}

double gm_objective(const Vector& y, const std::vector<Vector>& points) {
  double total = 0.0;
  for (const auto& x : points) total += (y - x).norm();
  return total;
}

namespace {

Vector coordinatewise_median(const std::vector<Vector>& points) {
  const auto dim = points.front().size();
  Vector median(dim);
  std::vector<double> coords(points.size());
  for (Eigen::Index d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < points.size(); ++i) coords[i] = points[i](d);
    median(d) = sample_quantile(coords, 0.5);
  }
  return median;
}

}  // namespace

GMResult geometric_median(const std::vector<Vector>& points, double tol,
                          int max_iters) {
  if (points.empty()) {
    throw std::invalid_argument("geometric_median: no points");
  }
  constexpr double kCoincident = 1e-12;

  GMResult result;
  Vector y = coordinatewise_median(points);
  double objective = gm_objective(y, points);
  double step = std::numeric_limits<double>::infinity();
  int iter = 0;

  for (; iter < max_iters; ++iter) {
    Vector weighted = Vector::Zero(y.size());
    double weight_sum = 0.0;
    Vector pull = Vector::Zero(y.size());
    int coincident = 0;
    for (const auto& x : points) {
      const double d = (y - x).norm();
      if (d <= kCoincident) {
        ++coincident;
        continue;
      }
      weighted += x / d;
      weight_sum += 1.0 / d;
      pull += (x - y) / d;
    }

    Vector next;
    if (coincident == 0) {
      next = weighted / weight_sum;
    } else {
      // Iterate sits on a data point: optimal iff the pull of the remaining
      // points does not exceed the multiplicity.
      const double pull_norm = pull.norm();
      if (pull_norm <= static_cast<double>(coincident)) {
        result.anchored = true;
        step = 0.0;
        break;
      }
      const double ratio = static_cast<double>(coincident) / pull_norm;
      next = (1.0 - ratio) * (weighted / weight_sum) + ratio * y;
    }

    step = (next - y).norm();
    const double next_objective = gm_objective(next, points);
    if (next_objective > objective + 1e-9 * (1.0 + objective)) {
      throw std::logic_error("geometric_median: objective increased");
    }
    objective = next_objective;
    y = std::move(next);
    if (step <= tol) {
      ++iter;
      break;
    }
  }

  if (!result.anchored) {
    for (const auto& x : points) {
      if ((y - x).norm() <= kCoincident) {
        result.anchored = true;
        break;
      }
    }
  }
  result.point = std::move(y);
  result.iters = iter;
  result.final_step = step;
  return result;
}

double gm_error_bound(std::span<const double> errors) {
  if (errors.empty()) {
    throw std::invalid_argument("gm_error_bound: empty list");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const int n = static_cast<int>(sorted.size());

  // Q(p) equals sorted[m-1] exactly for p in ((m-1)/n, m/n]; the factor
  // 2p/(2p-1) is decreasing in p, so p = m/n realizes the infimum on each
  // step. Only p > 1/2 is admissible.
  double best = std::numeric_limits<double>::infinity();
  for (int m = n / 2 + 1; m <= n; ++m) {
    const double p = static_cast<double>(m) / static_cast<double>(n);
    if (2.0 * p - 1.0 <= 0.0) continue;
    const double factor = 2.0 * p / (2.0 * p - 1.0);
    best = std::min(best, factor * sorted[m - 1]);
  }
  return best;
}

ClusteredPool build_clustered_pool(const std::vector<LocalEstimate>& estimates,
                                   const AggregationOptions& opts) {
  ClusteredPool stage;
  stage.benchmark_id =
      choose_benchmark(estimates, opts.benchmark_strategy, opts.kmeans_restarts,
                       opts.seed);
  auto [aligned, report] = align_signs(estimates, stage.benchmark_id);
  stage.aligned = std::move(aligned);
  stage.report = std::move(report);
  stage.pool = pool_atoms(stage.aligned);
  const int r = static_cast<int>(stage.aligned.front().A_tilde.rows());
  stage.clusters = kmeans(stage.pool, r, opts.kmeans_restarts, opts.seed);
  return stage;
}

namespace {

std::vector<std::vector<const Vector*>> cluster_members(
    const ClusteredPool& stage) {
  const int r = static_cast<int>(stage.clusters.centroids.size());
  std::vector<std::vector<const Vector*>> members(r);
  for (std::size_t idx = 0; idx < stage.pool.atoms.size(); ++idx) {
    members[stage.clusters.labels[idx]].push_back(&stage.pool.atoms[idx].value);
  }
  return members;
}

}  // namespace

AggregationResult aggregate_gm(const ClusteredPool& stage,
                               const AggregationOptions& opts) {
  const auto members = cluster_members(stage);
  const int r = static_cast<int>(members.size());
  const auto dim = stage.pool.atoms.front().value.size();

  AggregationResult result;
  result.method_tag = MethodTag::kRfIca;
  result.benchmark_id = stage.benchmark_id;
  result.cluster_model = stage.clusters;
  result.A_bar.resize(dim, r);
  result.gm_results.reserve(r);
  for (int a = 0; a < r; ++a) {
    std::vector<Vector> pts;
    pts.reserve(members[a].size());
    for (const Vector* v : members[a]) pts.push_back(*v);
    if (pts.empty()) {
      // Unreachable after empty-cluster repair; fall back to the centroid slot.
      result.gm_results.push_back(GMResult{stage.clusters.centroids[a], 0, 0.0,
                                           false});
      result.A_bar.col(a) = stage.clusters.centroids[a];
      continue;
    }
    GMResult gm = geometric_median(pts, opts.gm_tol, opts.gm_max_iters);
    result.A_bar.col(a) = gm.point;
    result.gm_results.push_back(std::move(gm));
  }
  return result;
}

AggregationResult aggregate_centroids(const ClusteredPool& stage) {
  const int r = static_cast<int>(stage.clusters.centroids.size());
  const auto dim = stage.pool.atoms.front().value.size();

  AggregationResult result;
  result.method_tag = MethodTag::kFicaCenters;
  result.benchmark_id = stage.benchmark_id;
  result.cluster_model = stage.clusters;
  result.A_bar.resize(dim, r);
  for (int a = 0; a < r; ++a) {
    result.A_bar.col(a) = stage.clusters.centroids[a];
  }
  return result;
}

AggregationResult rf_ica(const std::vector<LocalEstimate>& estimates,
                         const AggregationOptions& opts) {
  return aggregate_gm(build_clustered_pool(estimates, opts), opts);
}

AggregationResult fica_centers(const std::vector<LocalEstimate>& estimates,
                               const AggregationOptions& opts) {
  return aggregate_centroids(build_clustered_pool(estimates, opts));
}

AggregationResult simple_aggregate(const std::vector<LocalEstimate>& estimates,
                                   SimpleMode mode,
                                   const AggregationOptions& opts) {
  const int benchmark_id =
      choose_benchmark(estimates, opts.benchmark_strategy, opts.kmeans_restarts,
                       opts.seed);
  auto [aligned, report] = align_signs(estimates, benchmark_id);

  const Matrix* first = nullptr;
  for (const auto& est : aligned) {
    if (!est.failed) {
      first = &est.A_tilde;
      break;
    }
  }
  const int r = static_cast<int>(first->cols());

  AggregationResult result;
  result.method_tag =
      mode == SimpleMode::kMean ? MethodTag::kSimpleMean : MethodTag::kSimpleMedian;
  result.benchmark_id = benchmark_id;
  result.A_bar.resize(first->rows(), r);
  for (int j = 0; j < r; ++j) {
    std::vector<Vector> column_estimates;
    for (const auto& est : aligned) {
      if (!est.failed) column_estimates.push_back(est.A_tilde.col(j));
    }
    if (mode == SimpleMode::kMean) {
      Vector mean = Vector::Zero(first->rows());
      for (const auto& v : column_estimates) mean += v;
      result.A_bar.col(j) = mean / static_cast<double>(column_estimates.size());
    } else {
      GMResult gm = geometric_median(column_estimates, opts.gm_tol,
                                     opts.gm_max_iters);
      result.A_bar.col(j) = gm.point;
      result.gm_results.push_back(std::move(gm));
    }
  }
  return result;
}

}  // namespace rfica
