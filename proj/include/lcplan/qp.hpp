#pragma once

#include <Eigen/Dense>

namespace lcplan {

/// min 0.5 x'Hx + f'x  s.t.  G x <= h, with H symmetric positive semidefinite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

struct QpOptions {
  double tolerance = 1e-12;
  int max_iterations = 100;
  bool polish = true;  // re-solve the identified active set exactly
  bool operator==(const QpOptions&) const = default;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // inequality multipliers
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
};

/// Largest of the stationarity, primal infeasibility, dual infeasibility and
/// complementarity residuals (inf-norm).
double kktResidual(const QpProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda);

double qpObjective(const QpProblem& qp, const Eigen::VectorXd& x);

/// Primal-dual interior point with Mehrotra predictor-corrector steps,
/// optionally followed by an equality-constrained solve on the active set.
QpResult solveQp(const QpProblem& qp, const QpOptions& options = {});

}  // namespace lcplan
