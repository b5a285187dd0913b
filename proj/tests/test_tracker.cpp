#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lcplan/qp.hpp"
#include "lcplan/tracker.hpp"

using namespace lcplan;

TEST_SUITE("qp") {

TEST_CASE("unconstrained problem solves the normal equations") {
  QpProblem qp;
  qp.H = Eigen::Matrix2d{{4, 1}, {1, 3}};
  qp.f = Eigen::Vector2d(1, 2);
  qp.G = Eigen::MatrixXd(0, 2);
  qp.h = Eigen::VectorXd(0);
  const QpResult r = solveQp(qp);
  REQUIRE(r.converged);
  const Eigen::Vector2d expected = qp.H.ldlt().solve(-qp.f);
  CHECK((r.x - expected).norm() < 1e-10);
}

TEST_CASE("box-constrained problems match a grid search") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix2d m;
    m << u(rng), u(rng), u(rng), u(rng);
    QpProblem qp;
    qp.H = m * m.transpose() + 0.1 * Eigen::Matrix2d::Identity();
    qp.f = Eigen::Vector2d(3 * u(rng), 3 * u(rng));
    qp.G.resize(4, 2);
    qp.G << 1, 0, -1, 0, 0, 1, 0, -1;
    qp.h = Eigen::Vector4d(0.5, 0.5, 0.5, 0.5);
    const QpResult r = solveQp(qp);
    REQUIRE(r.converged);
    CHECK(r.kkt_residual <= 1e-8);
    CHECK(kktResidual(qp, r.x, r.lambda) <= 1e-8);
    double best = 1e300;
    for (int i = 0; i <= 1000; ++i)
      for (int j = 0; j <= 1000; ++j) best = std::min(best, qpObjective(qp, Eigen::Vector2d(-0.5 + i * 1e-3, -0.5 + j * 1e-3)));
    CHECK(qpObjective(qp, r.x) <= best + 1e-12);
    CHECK(qpObjective(qp, r.x) >= best - 1e-5);
    CHECK(qpObjective(qp, r.x) <= qpObjective(qp, Eigen::Vector2d::Zero()));
  }
}

TEST_CASE("random dense problems meet the KKT tolerance") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 9, m = 33;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n * n; ++i) a.data()[i] = g(rng);
    QpProblem qp;
    qp.H = a * a.transpose() + 1e-3 * Eigen::MatrixXd::Identity(n, n);
    qp.f = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
    qp.G = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return g(rng); });
    qp.h = Eigen::VectorXd::NullaryExpr(m, [&] { return std::abs(g(rng)) + 0.1; });  // x = 0 strictly feasible
    const QpResult r = solveQp(qp);
    REQUIRE(r.converged);
    CHECK(r.kkt_residual <= 1e-8);
    CHECK(qpObjective(qp, r.x) <= qpObjective(qp, Eigen::VectorXd::Zero(n)) + 1e-12);
  }
}

TEST_CASE("iteration cap reports non-convergence") {
  QpProblem qp;
  qp.H = Eigen::Matrix2d::Identity();
  qp.f = Eigen::Vector2d(-10, -10);
  qp.G = Eigen::RowVector2d(1, 1);
  qp.h = Eigen::VectorXd::Constant(1, 1.0);
  QpOptions o;
  o.max_iterations = 1;
  o.polish = false;
  CHECK_FALSE(solveQp(qp, o).converged);
}

}

TEST_SUITE("tracker") {

TEST_CASE("kinematic derivative") {
  const auto d0 = kinematicDerivative({0, 0, 0}, {10, 0}, 2.7);
  CHECK(d0.isApprox(Eigen::Vector3d(10, 0, 0)));
  const auto d1 = kinematicDerivative({0, 0, std::numbers::pi / 2}, {10, 0}, 2.7);
  CHECK(std::abs(d1[0]) < 1e-12);
  CHECK(d1[1] == doctest::Approx(10));
  CHECK(kinematicDerivative({0, 0, 0}, {10, 0.1}, 2.7)[2] == doctest::Approx(0.3716).epsilon(1e-3));
  CHECK_THROWS_AS(kinematicDerivative({0, 0, 0}, {10, std::numbers::pi / 2}, 2.7), std::domain_error);
}

TEST_CASE("error model entries") {
  const ReferencePoint ref{0, 0, 0, 0, 25, 0};
  const ErrorModel m = linearize(ref, 0.1, 2.7);
  CHECK(m.A.row(1).isApprox(Eigen::RowVector3d(0, 1, 2.5)));
  CHECK(m.B.row(0).isApprox(Eigen::RowVector2d(0.1, 0)));
  const ErrorModel still = linearize({0, 0, 0, 0.3, 0, 0.1}, 0.1, 2.7);
  CHECK(still.A.isApprox(Eigen::Matrix3d::Identity()));
  CHECK_THROWS_AS(linearize({0, 0, 0, 0, 10, 2.0}, 0.1, 2.7), std::domain_error);
}

TEST_CASE("error model equals the finite-difference Jacobian of the Euler step") {
  const ReferencePoint ref{0, 3, -2, 0.37, 21, 0.08};
  const double T = 0.1, l = 2.7, h = 1e-5;
  const ErrorModel m = linearize(ref, T, l);
  auto step = [&](const Eigen::Vector3d& p, const Eigen::Vector2d& u) -> Eigen::Vector3d {
    return p + T * kinematicDerivative({p[0], p[1], p[2]}, {u[0], u[1]}, l);
  };
  const Eigen::Vector3d p0(ref.x, ref.y, ref.heading);
  const Eigen::Vector2d u0(ref.v, ref.delta);
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(j) * h;
    const Eigen::Vector3d col = (step(p0 + e, u0) - step(p0 - e, u0)) / (2 * h);
    CHECK((col - m.A.col(j)).cwiseAbs().maxCoeff() < 1e-6);
  }
  for (int j = 0; j < 2; ++j) {
    const Eigen::Vector2d e = Eigen::Vector2d::Unit(j) * h;
    const Eigen::Vector3d col = (step(p0, u0 + e) - step(p0, u0 - e)) / (2 * h);
    CHECK((col - m.B.col(j)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("one-step error propagation is second-order accurate") {
  const ReferencePoint ref{0, 0, 0, 0.2, 20, 0.05};
  const double T = 0.1, l = 2.7;
  const ErrorModel m = linearize(ref, T, l);
  auto euler = [&](const Eigen::Vector3d& p, const Eigen::Vector2d& u) -> Eigen::Vector3d {
    return p + T * kinematicDerivative({p[0], p[1], p[2]}, {u[0], u[1]}, l);
  };
  const Eigen::Vector3d p0(0, 0, 0.2);
  const Eigen::Vector2d u0(20, 0.05);
  double prev = 0;
  for (double eps : {1e-2, 5e-3}) {
    const Eigen::Vector3d dp(eps, -eps, eps);
    const Eigen::Vector2d du(eps, eps);
    const Eigen::Vector3d nonlin = euler(p0 + dp, u0 + du) - euler(p0, u0);
    const double err = (nonlin - (m.A * dp + m.B * du)).norm();
    if (prev > 0) CHECK(err < prev / 3);  // quadratic: halving eps quarters the error
    prev = err;
  }
}

TEST_CASE("prediction matrices") {
  const ErrorModel m = linearize({0, 0, 0, 0.1, 25, 0.02}, 0.1, 2.7);
  const Prediction p11 = buildPrediction(m, 1, 1);
  CHECK(p11.lambda.isApprox(m.A));
  CHECK(p11.theta.isApprox(m.B));

  ErrorModel id = m;
  id.A.setIdentity();
  const Prediction pid = buildPrediction(id, 6, 4);
  for (int i = 1; i <= 6; ++i) {
    Eigen::Matrix<double, 3, 2> sum = Eigen::Matrix<double, 3, 2>::Zero();
    for (int k = 0; k < 4; ++k) sum += pid.theta.block<3, 2>(3 * (i - 1), 2 * k);
    CHECK(sum.isApprox(std::min(i, 4) * m.B));
  }

  // step-by-step recursion with random deviations; zero beyond nc
  const Prediction p = buildPrediction(m, 6, 4);
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  const Eigen::Vector3d psi(g(rng), g(rng), g(rng));
  Eigen::VectorXd U(8);
  for (int i = 0; i < 8; ++i) U[i] = g(rng);
  const Eigen::VectorXd Y = p.lambda * psi + p.theta * U;
  Eigen::Vector3d s = psi;
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector2d u = i < 4 ? Eigen::Vector2d(U.segment<2>(2 * i)) : Eigen::Vector2d::Zero();
    s = m.A * s + m.B * u;
    CHECK((Y.segment<3>(3 * i) - s).norm() < 1e-12);
  }
  CHECK_THROWS_AS(buildPrediction(m, 3, 4), std::invalid_argument);
}

std::vector<ReferencePoint> straightWindow(int n, double v) {
  std::vector<ReferencePoint> w;
  for (int i = 0; i < n; ++i) w.push_back({0.1 * i, v * 0.1 * i, 0, 0, v, 0});
  return w;
}

TEST_CASE("zero error on a straight reference needs no correction") {
  const MpcConfig cfg;
  const auto w = straightWindow(cfg.np + 1, 20);
  const ControlInput c = mpcStep({0, 0, 0}, w, cfg, {20, 0});
  CHECK(c.increments.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(c.epsilon == 0.0);
  CHECK(c.kkt_residual <= 1e-8);
}

TEST_CASE("lateral offset steers back, matching an exhaustive search") {
  MpcConfig cfg;
  cfg.nc = 1;
  const auto w = straightWindow(cfg.np + 1, 20);
  const KinematicState start{0, 0.2, 0};
  const ControlInput c = mpcStep(start, w, cfg, {20, 0});
  CHECK(c.increments[1] < 0);
  CHECK(std::abs(c.delta) <= cfg.delta_max);

  // independent cost: linear rollout of the error with a held input deviation
  const ErrorModel m = linearize(w[0], cfg.step, cfg.wheelbase);
  auto cost = [&](double dv, double dd) {
    Eigen::Vector3d e(0, 0.2, 0);
    double j = cfg.r[0] * dv * dv + cfg.r[1] * dd * dd;
    for (int i = 0; i < cfg.np; ++i) {
      const Eigen::Vector2d u = i == 0 ? Eigen::Vector2d(dv, dd) : Eigen::Vector2d::Zero();
      e = m.A * e + m.B * u;
      j += e.dot(cfg.q.cwiseProduct(e));
    }
    return j;
  };
  double best = 1e300, best_dv = 0, best_dd = 0;
  for (double dv = -cfg.dv_max; dv <= cfg.dv_max + 1e-12; dv += 1e-3)
    for (double dd = -cfg.ddelta_max; dd <= cfg.ddelta_max + 1e-12; dd += 1e-3)
      if (const double j = cost(dv, dd); j < best) best = j, best_dv = dv, best_dd = dd;
  CHECK(std::abs(c.increments[1] - best_dd) <= 1e-3);
  CHECK(std::abs(c.increments[0] - best_dv) <= 1e-3);
  CHECK(cost(c.increments[0], c.increments[1]) <= best + 1e-9);
}

TEST_CASE("unreachable hard bounds are relaxed by the slack") {
  MpcConfig cfg;
  cfg.v_max = 24.0;  // previous speed 25 cannot return below 24 within one increment of 0.8
  const auto w = straightWindow(cfg.np + 1, 25);
  const ControlInput c = mpcStep({0, 0, 0}, w, cfg, {25, 0});
  CHECK(c.epsilon > 0);
  CHECK(c.v <= cfg.v_max);
  cfg.rho *= 10;
  const ControlInput c10 = mpcStep({0, 0, 0}, w, cfg, {25, 0});
  CHECK(c10.epsilon <= c.epsilon + 1e-12);
}

TEST_CASE("straight constant-speed tracking stays on the reference") {
  const Trajectory tr = buildSymmetricTrajectory(25.0, 10.0, 250.0, 0.0);
  const TrackingResult r = track(tr, {0, 0, 0}, MpcConfig{});
  for (const auto& s : r.samples) CHECK(std::hypot(s.x - s.x_ref, s.y - s.y_ref) < 1e-3);
}

TEST_CASE("lane-change reference is followed closely") {
  const Trajectory tr = buildSymmetricTrajectory(25.0, 5.0, 125.0, 3.5);
  const TrackingResult r = track(tr, {0, 0, 0}, MpcConfig{});
  CHECK(r.max_lateral_error < 0.15);
  CHECK(std::abs(r.final_state.y - 3.5) < 0.1);
  CHECK(r.max_kkt_residual <= 1e-8);
  for (const auto& s : r.samples) {
    CHECK(std::abs(s.delta_cmd) <= MpcConfig{}.delta_max);
    CHECK(s.epsilon >= 0);
  }
}

TEST_CASE("initial lateral offset decays") {
  const Trajectory tr = buildSymmetricTrajectory(25.0, 10.0, 250.0, 0.0);
  const TrackingResult r = track(tr, {0, 0.3, 0}, MpcConfig{});
  double prev = 1e9;
  for (const auto& s : r.samples) {
    if (s.t < 1.0) continue;
    CHECK(std::abs(s.e_lat) <= prev + 1e-6);  // monotone down to solver noise
    prev = std::abs(s.e_lat);
  }
  CHECK(std::abs(r.samples.back().e_lat) < 0.01);
}

TEST_CASE("reference from a trajectory") {
  const Trajectory tr = buildSymmetricTrajectory(25.0, 5.0, 125.0, 3.5);
  const ReferencePoint mid = referenceAt(tr, 2.5, 10.0, 1.0, 2.7);
  CHECK(mid.x == doctest::Approx(10.0 + 62.5));
  CHECK(mid.y == doctest::Approx(1.0 + 1.75));
  const ReferencePoint after = referenceAt(tr, 6.0, 0.0, 0.0, 2.7);
  CHECK(after.x == doctest::Approx(125.0 + 25.0));
  CHECK(after.heading == 0.0);
  CHECK(after.delta == 0.0);
  MpcConfig bad;
  bad.np = 2;
  bad.nc = 3;
  CHECK_THROWS_AS(track(tr, {0, 0, 0}, bad), std::invalid_argument);
}

}
