#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rfica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Shared ground-truth mixing matrix (orthonormal columns when generated
// by this library) or an estimator of it.
struct MixingMatrix {
  Matrix entries;
  int r = 0;
};

// One client's observations Y = A * X.
struct ClientDataset {
  int client_id = 0;
  Matrix observations;  // r x n_k
  std::int64_t n_k = 0;
  bool corrupted = false;  // scenario metadata only
};

struct ExperimentScenario {
  int r = 10;
  int K = 30;
  std::int64_t n_normal = 5000;
  std::int64_t n_corrupt = 300;
  double corrupt_fraction = 0.1;
  double sparsity = 0.1;
  std::uint64_t seed = 0;
};

enum class InitMode { kRandomOrthogonal, kShared, kIdentity };

struct SolverConfig {
  int max_iters = 500;
  double tol = 1e-8;  // threshold on the iterate change in Frobenius norm
  InitMode init_mode = InitMode::kRandomOrthogonal;
  Matrix shared_init;  // used when init_mode == kShared
  std::uint64_t seed = 0;
};

// One client's local estimator of the mixing matrix, up to a signed
// permutation of the columns.
struct LocalEstimate {
  int client_id = 0;
  Matrix A_tilde;  // r x r, orthonormal columns when the solve succeeded
  std::int64_t n_k = 0;
  int iters_used = 0;
  bool converged = false;
  bool failed = false;  // degenerate data; excluded downstream
  std::string fail_reason;
};

struct WhiteningTransform {
  Matrix W;
  bool applied = false;
};

struct SignedPermutation {
  std::vector<int> perm;      // column i of the estimate matches perm[i]
  std::vector<int> signs;     // +1 / -1 per column
};

struct AlignmentReport {
  int benchmark_id = 0;
  // Indexed like the estimate list handed to align_signs.
  std::vector<std::vector<int>> chosen_signs;     // +1 / -1 per column
  std::vector<std::vector<int>> matched_index;    // benchmark column j_i
  std::vector<std::vector<int>> zero_norm_flags;  // columns left unchanged
};

// One pooled estimator column with provenance.
struct Atom {
  int client_id = 0;
  int column_index = 0;
  Vector value;
};

struct AtomPool {
  std::vector<Atom> atoms;
  std::vector<int> excluded_clients;  // failed estimates skipped with a warning
};

struct ClusterModel {
  std::vector<Vector> centroids;  // r centroids
  std::vector<int> labels;        // parallel to AtomPool::atoms, values in [0, r)
  double objective = 0.0;
  int restarts_run = 0;
};

struct GMResult {
  Vector point;
  int iters = 0;
  double final_step = 0.0;
  bool anchored = false;  // output coincides with an input point
};

enum class MethodTag { kRfIca, kFicaCenters, kSimpleMean, kSimpleMedian };

std::string method_name(MethodTag tag);

struct AggregationResult {
  Matrix A_bar;  // column a aggregates cluster a (or column slot a for the
                 // no-clustering baselines)
  ClusterModel cluster_model;
  std::vector<GMResult> gm_results;  // per cluster, empty for mean/centroid paths
  MethodTag method_tag = MethodTag::kRfIca;
  int benchmark_id = -1;
};

}  // namespace rfica
