#include "lram/qp.hpp"

#include <algorithm>
#include <limits>

namespace lram {

namespace {

constexpr double kFeasTol = 1e-12;
constexpr double kStepTol = 1e-13;
constexpr double kDualTol = 1e-12;

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& A, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), A.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = A.row(idx[r]);
  return out;
}

}  // namespace

ProjectionResult project_onto_polyhedron(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                         const Eigen::VectorXd& target, const Eigen::VectorXd& start,
                                         int max_iterations) {
  const Eigen::Index m = A.rows();
  if (b.size() != m || A.cols() != target.size() || start.size() != target.size()) {
    throw std::invalid_argument("project_onto_polyhedron: dimension mismatch");
  }
  if (((A * start - b).array() > kFeasTol).any()) {
    throw QpFailure("project_onto_polyhedron: start point is infeasible");
  }

  Eigen::VectorXd x = start;
  std::vector<int> working;
  ProjectionResult res;

  for (int it = 0; it < max_iterations; ++it) {
    // Minimise 1/2 ||x + p - target||^2 subject to A_W p = 0:
    //   p = -(g - A_W^T mu),  mu = (A_W A_W^T)^-1 A_W g,  g = x - target.
    const Eigen::VectorXd g = x - target;
    Eigen::VectorXd mu;
    Eigen::VectorXd p = -g;
    if (!working.empty()) {
      const Eigen::MatrixXd Aw = rows_of(A, working);
      mu = (Aw * Aw.transpose()).ldlt().solve(Aw * g);
      p += Aw.transpose() * mu;
    }

    if (p.norm() <= kStepTol * std::max(1.0, g.norm())) {
      // Stationary on the working set; multipliers are lambda = -mu.
      if (working.empty()) {
        res.x = x;
        res.iterations = it + 1;
        break;
      }
      Eigen::Index worst = -1;
      double worst_val = -kDualTol;
      for (Eigen::Index i = 0; i < mu.size(); ++i) {
        double lambda = -mu(i);
        if (lambda < worst_val) {
          worst_val = lambda;
          worst = i;
        }
      }
      if (worst < 0) {
        res.x = x;
        res.active = working;
        res.multipliers = -mu;
        res.iterations = it + 1;
        break;
      }
      working.erase(working.begin() + worst);
      continue;
    }

    // Ratio test over constraints outside the working set.
    double alpha = 1.0;
    int blocking = -1;
    const Eigen::VectorXd Ap = A * p;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) continue;
      if (Ap(i) <= kStepTol) continue;
      double slack = std::max(0.0, b(i) - A.row(i).dot(x));
      double step = slack / Ap(i);
      if (step < alpha) {
        alpha = step;
        blocking = static_cast<int>(i);
      }
    }
    x += alpha * p;
    if (blocking >= 0) working.push_back(blocking);

    if (it + 1 == max_iterations) throw QpFailure("project_onto_polyhedron: iteration limit reached");
  }
  if (res.x.size() == 0) throw QpFailure("project_onto_polyhedron: iteration limit reached");

  res.squared_distance = (res.x - target).squaredNorm();
  return res;
}

}  // namespace lram
