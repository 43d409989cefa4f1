#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rfica {

// Exact minimum-cost assignment on a square cost matrix (Jonker-Volgenant
// style shortest augmenting paths, O(n^3)). Returns row -> column.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<int>& row_to_col);

// True if rows and columns can be perfectly matched using entries with
// dist(i, j) <= threshold (bottleneck feasibility test).
bool matching_within(const Eigen::MatrixXd& dist, double threshold);

}  // namespace rfica
