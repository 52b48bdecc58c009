#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace lram {

struct QpFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProjectionResult {
  Eigen::VectorXd x;            // closest feasible point
  double squared_distance = 0;  // ||x - target||^2
  std::vector<int> active;      // working set at the optimum
  Eigen::VectorXd multipliers;  // KKT multipliers for `active`, all >= 0
  int iterations = 0;
};

/// Euclidean projection onto the polyhedron { x : A x <= b } by a primal
/// active-set method, started from a feasible point. Throws QpFailure when
/// the start is infeasible or the iteration cap is hit.
ProjectionResult project_onto_polyhedron(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& target, const Eigen::VectorXd& start,
                                         int max_iterations = 500);

}  // namespace lram
