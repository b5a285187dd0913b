#include "lcplan/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lcplan {

double qpObjective(const QpProblem& qp, const Eigen::VectorXd& x) { return 0.5 * x.dot(qp.H * x) + qp.f.dot(x); }

double kktResidual(const QpProblem& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  double r = (qp.H * x + qp.f + qp.G.transpose() * lambda).lpNorm<Eigen::Infinity>();
  if (qp.G.rows() == 0) return r;
  const Eigen::VectorXd slack = qp.h - qp.G * x;
  r = std::max(r, (-slack).cwiseMax(0.0).maxCoeff());
  r = std::max(r, (-lambda).cwiseMax(0.0).maxCoeff());
  r = std::max(r, lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
  return r;
}

namespace {

// largest alpha in (0, 1] keeping v + alpha dv >= 0
double stepToBoundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

// Solves the KKT system with the constraints where z > s held as equalities.
bool polishActiveSet(const QpProblem& qp, const Eigen::VectorXd& s, const Eigen::VectorXd& z, QpResult& res) {
  const Eigen::Index n = qp.H.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (z[i] > s[i]) active.push_back(i);
  const auto na = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + na, n + na);
  Eigen::VectorXd rhs(n + na);
  K.topLeftCorner(n, n) = qp.H;
  rhs.head(n) = -qp.f;
  for (Eigen::Index k = 0; k < na; ++k) {
    K.block(n + k, 0, 1, n) = qp.G.row(active[k]);
    K.block(0, n + k, n, 1) = qp.G.row(active[k]).transpose();
    rhs[n + k] = qp.h[active[k]];
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (lu.rank() < n + na) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < na; ++k) lambda[active[k]] = sol[n + k];
  const Eigen::VectorXd x = sol.head(n);
  const double r = kktResidual(qp, x, lambda);
  if (!(r < res.kkt_residual)) return false;
  res.x = x;
  res.lambda = lambda;
  res.kkt_residual = r;
  return true;
}

}  // namespace

QpResult solveQp(const QpProblem& qp, const QpOptions& options) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.G.rows();
  if (qp.H.cols() != n || qp.f.size() != n || (m > 0 && qp.G.cols() != n) || qp.h.size() != m)
    throw std::invalid_argument("solveQp: inconsistent dimensions");

  QpResult res;
  if (m == 0) {
    res.x = qp.H.ldlt().solve(-qp.f);
    res.lambda.resize(0);
    res.converged = true;
    res.kkt_residual = kktResidual(qp, res.x, res.lambda);
    return res;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = (qp.h - qp.G * x).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  const double scale = 1.0 + std::max(qp.f.lpNorm<Eigen::Infinity>(), qp.h.lpNorm<Eigen::Infinity>());

  bool breakdown = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd rd = qp.H * x + qp.f + qp.G.transpose() * z;
    const Eigen::VectorXd rp = qp.G * x + s - qp.h;
    const double mu = s.dot(z) / static_cast<double>(m);
    res.iterations = it;
    if (rd.lpNorm<Eigen::Infinity>() <= options.tolerance * scale &&
        rp.lpNorm<Eigen::Infinity>() <= options.tolerance * scale && mu <= options.tolerance) {
      res.converged = true;
      break;
    }

    const Eigen::VectorXd w = z.cwiseQuotient(s);
    Eigen::MatrixXd K = qp.H + qp.G.transpose() * w.asDiagonal() * qp.G;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
    if (ldlt.info() != Eigen::Success || !K.allFinite()) {
      breakdown = true;
      break;
    }

    auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      const Eigen::VectorXd sinv_rc = rc.cwiseQuotient(s);
      dx = ldlt.solve(-rd - qp.G.transpose() * (w.cwiseProduct(rp) - sinv_rc));
      dz = w.cwiseProduct(qp.G * dx + rp) - sinv_rc;
      ds = -(rc + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    Eigen::VectorXd dx, ds, dz;
    // predictor (affine scaling)
    direction(s.cwiseProduct(z), dx, ds, dz);
    const double a_aff = std::min(stepToBoundary(s, ds), stepToBoundary(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3);
    // corrector
    const Eigen::VectorXd rc =
        s.cwiseProduct(z) + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(m, sigma * mu);
    direction(rc, dx, ds, dz);
    const double alpha = std::min(1.0, 0.995 * std::min(stepToBoundary(s, ds), stepToBoundary(z, dz)));
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
  }

  res.x = x;
  res.lambda = z;
  res.kkt_residual = kktResidual(qp, x, z);
  if (options.polish && res.converged) {
    polishActiveSet(qp, s, z, res);
  } else if (options.polish && breakdown) {
    // Barrier weights too ill-conditioned to factor: an exact active-set
    // solve still certifies the point if it meets the tolerance.
    res.converged = polishActiveSet(qp, s, z, res) && res.kkt_residual <= options.tolerance * scale;
  }
  return res;
}

}  // namespace lcplan
