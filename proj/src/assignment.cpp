#include "rfica/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace rfica {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) {
    throw std::invalid_argument("solve_assignment: cost matrix must be square");
  }
  if (n == 0) return {};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] is the row assigned to column j, column 0 is virtual.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(row_to_col.size()); ++i) {
    total += cost(i, row_to_col[i]);
  }
  return total;
}

namespace {

bool try_kuhn(int row, const Eigen::MatrixXd& dist, double threshold,
              std::vector<char>& visited, std::vector<int>& col_to_row) {
  const int n = static_cast<int>(dist.cols());
  for (int j = 0; j < n; ++j) {
    if (visited[j] || dist(row, j) > threshold) continue;
    visited[j] = 1;
    if (col_to_row[j] < 0 ||
        try_kuhn(col_to_row[j], dist, threshold, visited, col_to_row)) {
      col_to_row[j] = row;
      return true;
    }
  }
  return false;
}

}  // namespace

bool matching_within(const Eigen::MatrixXd& dist, double threshold) {
  const int n = static_cast<int>(dist.rows());
  std::vector<int> col_to_row(n, -1);
  for (int i = 0; i < n; ++i) {
    std::vector<char> visited(n, 0);
    if (!try_kuhn(i, dist, threshold, visited, col_to_row)) return false;
  }
  return true;
}

}  // namespace rfica
