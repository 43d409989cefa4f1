#pragma once

#include <utility>

#include "rfica/types.hpp"

namespace rfica {

// Centers the data and applies W = Cov(Y)^{-1/2} (symmetric eigendecomposition)
// so the sample covariance of the result is the identity. Throws when the
// covariance is numerically singular.
std::pair<Matrix, WhiteningTransform> prewhiten(const Matrix& Y);

// Kurtosis objective sum_i ||Q y_i||_4^4 / n, the quantity the fixed-point
// iteration ascends.
double fastica_objective(const Matrix& Q, const Matrix& Y_white);

// Symmetric fixed-point FastICA with cubic nonlinearity over the orthogonal
// group. Convergence is measured after per-row sign alignment of consecutive
// iterates. Non-convergence is reported via the flag, never thrown.
LocalEstimate fastica_symmetric(const Matrix& Y_white, const SolverConfig& cfg);

// prewhiten + fastica_symmetric; degenerate data yields a flagged failed
// estimate instead of an exception so one bad client cannot abort a run.
LocalEstimate solve_client(const ClientDataset& ds, const SolverConfig& cfg);

}  // namespace rfica
