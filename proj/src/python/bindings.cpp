#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "rfica/alignment.hpp"
#include "rfica/clustering.hpp"
#include "rfica/diagnostics.hpp"
#include "rfica/local_solver.hpp"
#include "rfica/model_gen.hpp"
#include "rfica/robust_agg.hpp"

namespace py = pybind11;
using namespace rfica;

namespace {

InitMode init_mode_from_string(const std::string& name) {
  if (name == "random_orthogonal") return InitMode::kRandomOrthogonal;
  if (name == "shared") return InitMode::kShared;
  if (name == "identity") return InitMode::kIdentity;
  throw std::invalid_argument("unknown init_mode: " + name);
}

LocalEstimate make_estimate(int client_id, const Matrix& A_tilde,
                            std::int64_t n_k) {
  LocalEstimate est;
  est.client_id = client_id;
  est.A_tilde = A_tilde;
  est.n_k = n_k;
  est.converged = true;
  return est;
}

std::vector<LocalEstimate> estimates_from_python(
    const std::vector<std::tuple<int, Matrix, std::int64_t>>& raw) {
  std::vector<LocalEstimate> estimates;
  estimates.reserve(raw.size());
  for (const auto& [client_id, A, n_k] : raw) {
    estimates.push_back(make_estimate(client_id, A, n_k));
  }
  return estimates;
}

AggregationOptions options_from_args(const std::string& benchmark, int restarts,
                                     std::uint64_t seed) {
  AggregationOptions opts;
  opts.benchmark_strategy = benchmark == "best_kmeans_loss"
                                ? BenchmarkStrategy::kBestKmeansLoss
                                : BenchmarkStrategy::kLargestN;
  opts.kmeans_restarts = restarts;
  opts.seed = seed;
  return opts;
}

}  // namespace

PYBIND11_MODULE(_rfica, m) {
  m.doc() = "Robust one-shot aggregation for federated ICA";

  py::class_<LocalEstimate>(m, "LocalEstimate")
      .def(py::init(&make_estimate), py::arg("client_id"), py::arg("A_tilde"),
           py::arg("n_k"))
      .def_readonly("client_id", &LocalEstimate::client_id)
      .def_readonly("A_tilde", &LocalEstimate::A_tilde)
      .def_readonly("n_k", &LocalEstimate::n_k)
      .def_readonly("iters_used", &LocalEstimate::iters_used)
      .def_readonly("converged", &LocalEstimate::converged)
      .def_readonly("failed", &LocalEstimate::failed);

  py::class_<GMResult>(m, "GMResult")
      .def_readonly("point", &GMResult::point)
      .def_readonly("iters", &GMResult::iters)
      .def_readonly("final_step", &GMResult::final_step)
      .def_readonly("anchored", &GMResult::anchored);

  m.def("nearest_orthogonal", &nearest_orthogonal, py::arg("M"));
  m.def(
      "generate_mixing",
      [](int r, std::uint64_t seed) { return generate_mixing(r, seed).entries; },
      py::arg("r"), py::arg("seed"));
  m.def("generate_sources", &generate_sources, py::arg("r"), py::arg("n"),
        py::arg("sparsity"), py::arg("seed"));
  m.def("column_separation", &column_separation, py::arg("A"));

  m.def(
      "make_scenario",
      [](int r, int K, std::int64_t n_normal, std::int64_t n_corrupt,
         double corrupt_fraction, double sparsity, std::uint64_t seed) {
        const Scenario sc = make_scenario(ExperimentScenario{
            r, K, n_normal, n_corrupt, corrupt_fraction, sparsity, seed});
        std::vector<std::tuple<int, Matrix, bool>> clients;
        clients.reserve(sc.clients.size());
        for (const auto& c : sc.clients) {
          clients.emplace_back(c.client_id, c.observations, c.corrupted);
        }
        return py::make_tuple(sc.mixing.entries, clients);
      },
      py::arg("r"), py::arg("K"), py::arg("n_normal"), py::arg("n_corrupt"),
      py::arg("corrupt_fraction"), py::arg("sparsity"), py::arg("seed"));

  m.def(
      "prewhiten",
      [](const Matrix& Y) {
        auto [white, transform] = prewhiten(Y);
        return py::make_tuple(white, transform.W);
      },
      py::arg("Y"));

  m.def(
      "fastica_symmetric",
      [](const Matrix& Y_white, int max_iters, double tol,
         const std::string& init_mode, std::uint64_t seed,
         const std::optional<Matrix>& shared_init) {
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.init_mode = init_mode_from_string(init_mode);
        cfg.seed = seed;
        if (shared_init) cfg.shared_init = *shared_init;
        return fastica_symmetric(Y_white, cfg);
      },
      py::arg("Y_white"), py::arg("max_iters") = 500, py::arg("tol") = 1e-8,
      py::arg("init_mode") = "random_orthogonal", py::arg("seed") = 0,
      py::arg("shared_init") = std::nullopt);

  m.def(
      "solve_client",
      [](const Matrix& Y, int client_id, int max_iters, double tol,
         const std::string& init_mode, std::uint64_t seed) {
        ClientDataset ds;
        ds.client_id = client_id;
        ds.observations = Y;
        ds.n_k = Y.cols();
        SolverConfig cfg;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.init_mode = init_mode_from_string(init_mode);
        cfg.seed = seed;
        return solve_client(ds, cfg);
      },
      py::arg("Y"), py::arg("client_id") = 0, py::arg("max_iters") = 500,
      py::arg("tol") = 1e-8, py::arg("init_mode") = "random_orthogonal",
      py::arg("seed") = 0);

  m.def(
      "sample_quantile",
      [](const std::vector<double>& values, double p) {
        return sample_quantile(values, p);
      },
      py::arg("values"), py::arg("p"));

  m.def(
      "geometric_median",
      [](const Matrix& points, double tol, int max_iters) {
        std::vector<Vector> pts;
        pts.reserve(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
          pts.push_back(points.row(i).transpose());
        }
        return geometric_median(pts, tol, max_iters);
      },
      py::arg("points"), py::arg("tol") = 1e-10, py::arg("max_iters") = 1000,
      "Geometric median of the rows of `points`.");

  m.def(
      "gm_error_bound",
      [](const std::vector<double>& errors) { return gm_error_bound(errors); },
      py::arg("errors"));

  m.def(
      "signed_perm_distance",
      [](const Matrix& A_hat, const Matrix& A_star) {
        auto [error, P] = signed_perm_distance(A_hat, A_star);
        return py::make_tuple(error, P.perm, P.signs);
      },
      py::arg("A_hat"), py::arg("A_star"));

  m.def("best_label_permutation", &best_label_permutation, py::arg("est_labels"),
        py::arg("true_labels"), py::arg("r"));
  m.def("misclustering_rates", &misclustering_rates, py::arg("est_labels"),
        py::arg("true_labels"), py::arg("K"), py::arg("r"));

  m.def(
      "align_signs",
      [](const std::vector<std::tuple<int, Matrix, std::int64_t>>& raw,
         int benchmark_id) {
        auto [aligned, report] =
            align_signs(estimates_from_python(raw), benchmark_id);
        std::vector<Matrix> matrices;
        matrices.reserve(aligned.size());
        for (const auto& est : aligned) matrices.push_back(est.A_tilde);
        return matrices;
      },
      py::arg("estimates"), py::arg("benchmark_id"));

  m.def(
      "kmeans",
      [](const Matrix& atoms, int r, int restarts, std::uint64_t seed) {
        AtomPool pool;
        for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
          pool.atoms.push_back(
              Atom{static_cast<int>(i), 0, atoms.row(i).transpose()});
        }
        const ClusterModel model = kmeans(pool, r, restarts, seed);
        Matrix centroids(r, atoms.cols());
        for (int a = 0; a < r; ++a) {
          centroids.row(a) = model.centroids[a].transpose();
        }
        return py::make_tuple(model.labels, centroids, model.objective);
      },
      py::arg("atoms"), py::arg("r"), py::arg("restarts") = 10,
      py::arg("seed") = 0, "k-means over the rows of `atoms`.");

  m.def(
      "aggregate",
      [](const std::vector<std::tuple<int, Matrix, std::int64_t>>& raw,
         const std::string& method, const std::string& benchmark, int restarts,
         std::uint64_t seed) {
        const auto estimates = estimates_from_python(raw);
        const auto opts = options_from_args(benchmark, restarts, seed);
        AggregationResult result;
        if (method == "rf_ica") {
          result = rf_ica(estimates, opts);
        } else if (method == "fica_centers") {
          result = fica_centers(estimates, opts);
        } else if (method == "simple_mean") {
          result = simple_aggregate(estimates, SimpleMode::kMean, opts);
        } else if (method == "simple_median") {
          result = simple_aggregate(estimates, SimpleMode::kMedian, opts);
        } else {
          throw std::invalid_argument("unknown method: " + method);
        }
        return result.A_bar;
      },
      py::arg("estimates"), py::arg("method") = "rf_ica",
      py::arg("benchmark") = "largest_n", py::arg("restarts") = 10,
      py::arg("seed") = 0,
      "Aggregate (client_id, A_tilde, n_k) estimates into one matrix.");
}
