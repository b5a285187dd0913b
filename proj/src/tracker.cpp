#include "lcplan/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lcplan {

namespace {

double wrapAngle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

void requireSteer(double delta, const char* where) {
  if (!(std::abs(delta) < std::numbers::pi / 2))
    throw std::domain_error(std::string(where) + ": steer angle must satisfy |delta| < pi/2");
}

}  // namespace

Eigen::Vector3d kinematicDerivative(const KinematicState& s, const KinematicInput& u, double wheelbase) {
  requireSteer(u.delta, "kinematicDerivative");
  return {u.v * std::cos(s.heading), u.v * std::sin(s.heading), u.v * std::tan(u.delta) / wheelbase};
}

KinematicState integrateKinematic(const KinematicState& s, const KinematicInput& u, double wheelbase, double dt,
                                  int substeps) {
  Eigen::Vector3d p(s.x, s.y, s.heading);
  const double h = dt / substeps;
  auto f = [&](const Eigen::Vector3d& q) { return kinematicDerivative({q[0], q[1], q[2]}, u, wheelbase); };
  for (int i = 0; i < substeps; ++i) {
    const Eigen::Vector3d k1 = f(p);
    const Eigen::Vector3d k2 = f(p + 0.5 * h * k1);
    const Eigen::Vector3d k3 = f(p + 0.5 * h * k2);
    const Eigen::Vector3d k4 = f(p + h * k3);
    p += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return {p[0], p[1], p[2]};
}

ErrorModel linearize(const ReferencePoint& ref, double step, double wheelbase) {
  requireSteer(ref.delta, "linearize");
  ErrorModel m;
  m.step = step;
  m.reference = ref;
  const double c = std::cos(ref.heading), s = std::sin(ref.heading);
  m.A = Eigen::Matrix3d::Identity();
  m.A(0, 2) = -ref.v * s * step;
  m.A(1, 2) = ref.v * c * step;
  const double cd = std::cos(ref.delta);
  m.B << c * step, 0.0,
         s * step, 0.0,
         std::tan(ref.delta) * step / wheelbase, ref.v * step / (wheelbase * cd * cd);
  return m;
}

Prediction buildPrediction(const ErrorModel& model, int np, int nc) {
  if (np < 1 || nc < 1 || nc > np) throw std::invalid_argument("buildPrediction: need 1 <= nc <= np");
  Prediction p;
  p.lambda.resize(3 * np, 3);
  p.theta = Eigen::MatrixXd::Zero(3 * np, 2 * nc);
  std::vector<Eigen::Matrix3d> powers(static_cast<std::size_t>(np) + 1);
  powers[0] = Eigen::Matrix3d::Identity();
  for (int i = 1; i <= np; ++i) powers[i] = model.A * powers[i - 1];
  for (int i = 1; i <= np; ++i) {
    p.lambda.block<3, 3>(3 * (i - 1), 0) = powers[i];
    for (int k = 1; k <= std::min(i, nc); ++k) p.theta.block<3, 2>(3 * (i - 1), 2 * (k - 1)) = powers[i - k] * model.B;
  }
  return p;
}

void MpcConfig::validate() const {
  if (np < 1 || nc < 1 || nc > np) throw std::invalid_argument("mpc: need 1 <= nc <= np");
  if ((q.array() < 0).any() || (r.array() < 0).any()) throw std::invalid_argument("mpc: weights must be >= 0");
  if (!(rho > 0)) throw std::invalid_argument("mpc: rho must be > 0");
  if (!(v_max > v_min) || !(delta_max > 0) || delta_max >= std::numbers::pi / 2)
    throw std::invalid_argument("mpc: input bounds invalid");
  if (!(dv_max > 0) || !(ddelta_max > 0)) throw std::invalid_argument("mpc: increment bounds must be > 0");
  if (!(step > 0) || !(wheelbase > 0)) throw std::invalid_argument("mpc: step and wheelbase must be > 0");
}

QpProblem buildMpcQp(const KinematicState& current, std::span<const ReferencePoint> window, const MpcConfig& cfg,
                     const KinematicInput& previous) {
  const int np = cfg.np, nc = cfg.nc;
  if (static_cast<int>(window.size()) < np + 1) throw std::invalid_argument("mpc: reference window too short");
  const ReferencePoint& r0 = window[0];
  const ErrorModel model = linearize(r0, cfg.step, cfg.wheelbase);
  const Prediction pred = buildPrediction(model, np, nc);

  const Eigen::Vector3d err0(current.x - r0.x, current.y - r0.y, wrapAngle(current.heading - r0.heading));
  // U~_j = u_prev + sum_{m<=j} du_m - u_ref(j)
  Eigen::VectorXd offset(2 * nc);
  for (int j = 0; j < nc; ++j) {
    offset[2 * j] = previous.v - window[j].v;
    offset[2 * j + 1] = previous.delta - window[j].delta;
  }
  Eigen::MatrixXd cumsum = Eigen::MatrixXd::Zero(2 * nc, 2 * nc);
  for (int j = 0; j < nc; ++j)
    for (int m = 0; m <= j; ++m) cumsum.block<2, 2>(2 * j, 2 * m).setIdentity();

  const Eigen::VectorXd e0 = pred.lambda * err0 + pred.theta * offset;
  const Eigen::MatrixXd phi = pred.theta * cumsum;
  Eigen::VectorXd qbar(3 * np), rbar(2 * nc);
  for (int i = 0; i < np; ++i) qbar.segment<3>(3 * i) = cfg.q;
  for (int j = 0; j < nc; ++j) rbar.segment<2>(2 * j) = cfg.r;

  const int nu = 2 * nc;
  QpProblem qp;
  qp.H = Eigen::MatrixXd::Zero(nu + 1, nu + 1);
  qp.H.topLeftCorner(nu, nu) = 2.0 * (phi.transpose() * qbar.asDiagonal() * phi);
  qp.H.topLeftCorner(nu, nu).diagonal() += 2.0 * rbar;
  qp.H(nu, nu) = 2.0 * cfg.rho;
  qp.f = Eigen::VectorXd::Zero(nu + 1);
  qp.f.head(nu) = 2.0 * phi.transpose() * qbar.asDiagonal() * e0;

  // per step and input: u <= max, -u <= -min, du <= dmax, -du <= dmax, each relaxed by eps * scale
  const int rows = 8 * nc + 1;
  qp.G = Eigen::MatrixXd::Zero(rows, nu + 1);
  qp.h = Eigen::VectorXd::Zero(rows);
  const Eigen::Vector2d u_prev(previous.v, previous.delta);
  const Eigen::Vector2d u_max(cfg.v_max, cfg.delta_max), u_min(cfg.v_min, -cfg.delta_max);
  const Eigen::Vector2d du_max(cfg.dv_max, cfg.ddelta_max);
  const Eigen::Vector2d u_scale(0.5 * (cfg.v_max - cfg.v_min), cfg.delta_max);
  int row = 0;
  for (int j = 0; j < nc; ++j) {
    for (int c = 0; c < 2; ++c) {
      for (int m = 0; m <= j; ++m) {
        qp.G(row, 2 * m + c) = 1.0;
        qp.G(row + 1, 2 * m + c) = -1.0;
      }
      qp.G(row, nu) = -u_scale[c];
      qp.G(row + 1, nu) = -u_scale[c];
      qp.h[row] = u_max[c] - u_prev[c];
      qp.h[row + 1] = u_prev[c] - u_min[c];
      qp.G(row + 2, 2 * j + c) = 1.0;
      qp.G(row + 3, 2 * j + c) = -1.0;
      qp.G(row + 2, nu) = -du_max[c];
      qp.G(row + 3, nu) = -du_max[c];
      qp.h[row + 2] = du_max[c];
      qp.h[row + 3] = du_max[c];
      row += 4;
    }
  }
  qp.G(row, nu) = -1.0;  // eps >= 0
  return qp;
}

ControlInput mpcStep(const KinematicState& current, std::span<const ReferencePoint> window, const MpcConfig& cfg,
                     const KinematicInput& previous) {
  cfg.validate();
  const QpProblem qp = buildMpcQp(current, window, cfg, previous);
  const QpResult sol = solveQp(qp, cfg.qp);
  if (!sol.converged || !sol.x.allFinite())
    throw ControllerFault("mpc: QP did not converge within " + std::to_string(cfg.qp.max_iterations) +
                          " iterations (KKT residual " + std::to_string(sol.kkt_residual) + ")");
  const int nu = 2 * cfg.nc;
  ControlInput out;
  out.increments = sol.x.head(nu);
  out.epsilon = std::max(0.0, sol.x[nu]);
  out.kkt_residual = sol.kkt_residual;
  out.iterations = sol.iterations;
  out.v = std::clamp(previous.v + out.increments[0], cfg.v_min, cfg.v_max);
  out.delta = std::clamp(previous.delta + out.increments[1], -cfg.delta_max, cfg.delta_max);
  return out;
}

ReferencePoint referenceAt(const Trajectory& traj, double t, double x0, double y0, double wheelbase) {
  ReferencePoint r;
  r.t = t;
  const double tc = std::clamp(t, 0.0, traj.duration);
  const auto e = evaluate(traj.coeffs, tc);
  const double extra = t - tc;
  const double vx = e.vx, vy = t > traj.duration ? 0.0 : e.vy;
  r.x = x0 + e.x + vx * extra;
  r.y = y0 + e.y;
  r.v = std::hypot(vx, vy);
  r.heading = std::atan2(vy, vx);
  if (t <= traj.duration && r.v > 1e-9) {
    const double kappa = (e.vx * e.ay - e.vy * e.ax) / (r.v * r.v * r.v);
    r.delta = std::atan(wheelbase * kappa);
  }
  return r;
}

TrackingResult track(const Trajectory& traj, const KinematicState& initial, const MpcConfig& cfg, double x0,
                     double y0) {
  cfg.validate();
  if (traj.duration < cfg.step) throw std::invalid_argument("track: trajectory shorter than one step");
  const int n = static_cast<int>(std::llround(traj.duration / cfg.step));
  TrackingResult out;
  KinematicState state = initial;
  const ReferencePoint first = referenceAt(traj, 0.0, x0, y0, cfg.wheelbase);
  KinematicInput u{first.v, first.delta};
  std::vector<ReferencePoint> window(static_cast<std::size_t>(cfg.np) + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = k * cfg.step;
    for (int i = 0; i <= cfg.np; ++i) window[i] = referenceAt(traj, t + i * cfg.step, x0, y0, cfg.wheelbase);
    TrackedSample s;
    s.t = t;
    s.x_ref = window[0].x;
    s.y_ref = window[0].y;
    s.x = state.x;
    s.y = state.y;
    s.heading = state.heading;
    const double dx = state.x - window[0].x, dy = state.y - window[0].y;
    const double c = std::cos(window[0].heading), sn = std::sin(window[0].heading);
    s.e_lon = c * dx + sn * dy;
    s.e_lat = -sn * dx + c * dy;
    if (k < n) {
      const ControlInput ctl = mpcStep(state, window, cfg, u);
      u = {ctl.v, ctl.delta};
      s.epsilon = ctl.epsilon;
      out.max_kkt_residual = std::max(out.max_kkt_residual, ctl.kkt_residual);
    }
    s.v_cmd = u.v;
    s.delta_cmd = u.delta;
    s.e_v = u.v - window[0].v;
    out.max_lateral_error = std::max(out.max_lateral_error, std::abs(s.e_lat));
    out.samples.push_back(s);
    if (k < n) state = integrateKinematic(state, u, cfg.wheelbase, cfg.step);
  }
  out.final_state = state;
  return out;
}

}  // namespace lcplan
