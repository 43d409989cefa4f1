#include "rfica/model_gen.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rfica/rng.hpp"

namespace rfica {

namespace {
constexpr std::uint64_t kSaltMixing = 0x6d697869;
constexpr std::uint64_t kSaltPlacement = 0x706c6163;
constexpr std::uint64_t kSaltSources = 0x73726373;
}  // namespace

Matrix nearest_orthogonal(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smallest = svd.singularValues().minCoeff();
  if (smallest <= 1e-12) {
    std::ostringstream msg;
    msg << "nearest_orthogonal: rank-deficient input, smallest singular value "
        << smallest;
    throw std::invalid_argument(msg.str());
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

MixingMatrix generate_mixing(int r, std::uint64_t seed) {
  if (r < 2) {
    throw std::invalid_argument("generate_mixing: r must be at least 2");
  }
  Rng rng(seed);
  Matrix gaussian(r, r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) {
      gaussian(i, j) = rng.next_normal();
    }
  }
  return MixingMatrix{nearest_orthogonal(gaussian), r};
}

Matrix generate_sources(int r, std::int64_t n, double sparsity,
                        std::uint64_t seed) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw std::invalid_argument("generate_sources: sparsity must be in (0, 1]");
  }
  if (n < 1 || r < 1) {
    throw std::invalid_argument("generate_sources: r and n must be positive");
  }
  Rng rng(seed);
  Matrix X = Matrix::Zero(r, n);
  for (std::int64_t j = 0; j < n; ++j) {
    for (int i = 0; i < r; ++i) {
      if (rng.next_bernoulli(sparsity)) {
        X(i, j) = rng.next_normal();
      }
    }
  }
  return X;
}

double column_separation(const Matrix& A) {
  const int r = static_cast<int>(A.cols());
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < r; ++a) {
    for (int b = a + 1; b < r; ++b) {
      best = std::min(best, (A.col(a) - A.col(b)).squaredNorm());
    }
  }
  return best;
}

Scenario make_scenario(const ExperimentScenario& sc) {
  if (sc.corrupt_fraction < 0.0 || sc.corrupt_fraction >= 0.5) {
    throw std::invalid_argument(
        "make_scenario: corrupt_fraction must lie in [0, 0.5); the geometric "
        "median only tolerates corruption below its 0.5 breakdown point");
  }
  if (sc.K < 1 || sc.n_normal < 1 || sc.n_corrupt < 1) {
    throw std::invalid_argument("make_scenario: K and sample sizes must be positive");
  }

  Scenario out;
  out.mixing = generate_mixing(sc.r, mix_seed(sc.seed, kSaltMixing));

  // floor with a nudge so that fractions like 0.3 * 10 land on the integer.
  const int num_corrupt = static_cast<int>(
      std::floor(sc.corrupt_fraction * static_cast<double>(sc.K) + 1e-9));

  std::vector<int> order(sc.K);
  std::iota(order.begin(), order.end(), 0);
  Rng placement(mix_seed(sc.seed, kSaltPlacement));
  placement.shuffle(order);
  std::vector<bool> corrupted(sc.K, false);
  for (int i = 0; i < num_corrupt; ++i) {
    corrupted[order[i]] = true;
  }

  out.clients.reserve(sc.K);
  for (int k = 0; k < sc.K; ++k) {
    const std::int64_t n_k = corrupted[k] ? sc.n_corrupt : sc.n_normal;
    const Matrix X = generate_sources(
        sc.r, n_k, sc.sparsity,
        mix_seed(sc.seed, kSaltSources + static_cast<std::uint64_t>(k)));
    ClientDataset ds;
    ds.client_id = k;
    ds.observations = out.mixing.entries * X;
    ds.n_k = n_k;
    ds.corrupted = corrupted[k];
    out.clients.push_back(std::move(ds));
  }
  return out;
}

}  // namespace rfica
