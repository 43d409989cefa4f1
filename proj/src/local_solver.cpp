#include "rfica/local_solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rfica/model_gen.hpp"
#include "rfica/rng.hpp"

namespace rfica {

std::pair<Matrix, WhiteningTransform> prewhiten(const Matrix& Y) {
  const auto n = Y.cols();
  const Vector mean = Y.rowwise().mean();
  const Matrix centered = Y.colwise() - mean;
  const Matrix cov = (centered * centered.transpose()) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const double smallest = es.eigenvalues().minCoeff();
  if (smallest <= 1e-10) {
    std::ostringstream msg;
    msg << "prewhiten: sample covariance is singular, smallest eigenvalue "
        << smallest;
    throw std::invalid_argument(msg.str());
  }
  const Matrix W = es.eigenvectors() *
                   es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  WhiteningTransform transform{W, true};
  return {W * centered, std::move(transform)};
}

double fastica_objective(const Matrix& Q, const Matrix& Y_white) {
  const Matrix projected = Q * Y_white;
  return projected.array().pow(4).sum() /
         static_cast<double>(Y_white.cols());
}

namespace {

Matrix initial_rotation(int r, const SolverConfig& cfg) {
  switch (cfg.init_mode) {
    case InitMode::kIdentity:
      return Matrix::Identity(r, r);
    case InitMode::kShared: {
      if (cfg.shared_init.rows() != r || cfg.shared_init.cols() != r) {
        throw std::invalid_argument(
            "fastica_symmetric: shared_init has the wrong shape");
      }
      return nearest_orthogonal(cfg.shared_init);
    }
    case InitMode::kRandomOrthogonal:
    default: {
      Rng rng(cfg.seed);
      Matrix gaussian(r, r);
      for (int j = 0; j < r; ++j) {
        for (int i = 0; i < r; ++i) {
          gaussian(i, j) = rng.next_normal();
        }
      }
      return nearest_orthogonal(gaussian);
    }
  }
}

}  // namespace

LocalEstimate fastica_symmetric(const Matrix& Y_white, const SolverConfig& cfg) {
  if (cfg.max_iters < 1 || !(cfg.tol > 0.0)) {
    throw std::invalid_argument("fastica_symmetric: invalid solver config");
  }
  const int r = static_cast<int>(Y_white.rows());
  const auto n = Y_white.cols();

  LocalEstimate est;
  est.n_k = n;
  if (n < r) {
    est.failed = true;
    est.fail_reason = "fewer samples than dimensions";
    est.A_tilde = Matrix::Identity(r, r);
    return est;
  }

  Matrix Q = initial_rotation(r, cfg);
  int iters = 0;
  bool converged = false;
  for (; iters < cfg.max_iters; ++iters) {
    const Matrix projected = Q * Y_white;
    const Matrix cubed = projected.array().cube();
    const Matrix update = (cubed * Y_white.transpose()) / static_cast<double>(n);

    Matrix next;
    try {
      next = nearest_orthogonal(update);
    } catch (const std::invalid_argument&) {
      // Degenerate fixed-point step; report the current iterate unconverged.
      break;
    }
    // The fixed point is only defined up to row signs.
    for (int i = 0; i < r; ++i) {
      if (next.row(i).dot(Q.row(i)) < 0.0) next.row(i) *= -1.0;
    }
    const double step = (next - Q).norm();
    Q = next;
    if (step <= cfg.tol) {
      converged = true;
      ++iters;
      break;
    }
  }

  est.A_tilde = Q.transpose();
  est.iters_used = iters;
  est.converged = converged;
  return est;
}

LocalEstimate solve_client(const ClientDataset& ds, const SolverConfig& cfg) {
  LocalEstimate est;
  try {
    auto [whitened, transform] = prewhiten(ds.observations);
    est = fastica_symmetric(whitened, cfg);
  } catch (const std::invalid_argument& err) {
    est.failed = true;
    est.fail_reason = err.what();
    const int r = static_cast<int>(ds.observations.rows());
    est.A_tilde = Matrix::Identity(r, r);
  }
  est.client_id = ds.client_id;
  est.n_k = ds.n_k;
  return est;
}

}  // namespace rfica
