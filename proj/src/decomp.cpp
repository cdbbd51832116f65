#include "hsc/decomp.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

#include "hsc/errors.hpp"

namespace hsc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PrePostView LatentPanel::view() const {
  const MatrixXd y = outcomes();
  const Index tp = y.rows() - t0;
  const Index n0 = y.cols() - 1;
  PrePostView v;
  v.y_pre = y.col(0).head(t0);
  v.y_post = y.col(0).tail(tp);
  v.x_pre = y.block(0, 1, t0, n0);
  v.x_post = y.block(t0, 1, tp, n0);
  return v;
}

std::vector<double> decomposition_grid() {
  return {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
          0.85, 0.9, 0.93, 0.95, 0.97, 0.98, 0.99, 0.995, 1.0};
}

VectorXd oracle_weights(const LatentPanel& latent, int q, double zeta, const QPOptions& opts) {
  const Index t0 = latent.t0;
  const Index n0 = latent.systematic.cols() - 1;
  const HscProblem problem(latent.systematic.col(0).head(t0),
                           latent.systematic.block(0, 1, t0, n0),
                           latent.systematic.block(t0, 1, latent.systematic.rows() - t0, n0), q,
                           zeta);
  return solve(problem.qp(1.0), opts).weights;
}

namespace {

struct Pieces {
  Index t0, tp, n0;
  MatrixXd l0, r0, x_pre, x_post;
  VectorXd l1, r1, y_pre, y_post;
};

Pieces pieces(const LatentPanel& latent) {
  Pieces p;
  p.t0 = latent.t0;
  p.tp = latent.systematic.rows() - latent.t0;
  p.n0 = latent.systematic.cols() - 1;
  p.l0 = latent.systematic.block(0, 1, p.t0, p.n0);
  p.r0 = latent.residual.block(0, 1, p.t0, p.n0);
  p.l1 = latent.systematic.col(0).head(p.t0);
  p.r1 = latent.residual.col(0).head(p.t0);
  const MatrixXd y = latent.outcomes();
  p.x_pre = y.block(0, 1, p.t0, p.n0);
  p.x_post = y.block(p.t0, 1, p.tp, p.n0);
  p.y_pre = y.col(0).head(p.t0);
  p.y_post = y.col(0).tail(p.tp);
  return p;
}

}  // namespace

AbDecomposition ab_decompose(const HscFit& fit, const LatentPanel& latent,
                             const VectorXd& oracle) {
  const Pieces p = pieces(latent);
  if (fit.weights.size() != p.n0 || oracle.size() != p.n0) {
    throw ValidationError("ab_decompose: donor count mismatch");
  }
  if (fit.forecaster.map.rows() != p.tp || fit.forecaster.map.cols() != p.t0) {
    throw ValidationError("ab_decompose: fitted forecaster does not match the panel");
  }
  const BasisPtr basis = cached_basis(p.t0, fit.q);
  const RhoMetric<double> metric(basis, fit.rho);
  const MatrixXd s = metric.smoother();
  const MatrixXd p0 = basis->null_projector();
  const MatrixXd pp = basis->orth_projector();
  const MatrixXd gnull = null_continuation_map(p.t0, fit.q, p.tp);
  const MatrixXd& b = fit.forecaster.map;

  AbDecomposition d;
  d.pi = (gnull * p0 + b * pp) * s;
  d.pi_offset = fit.forecaster.offset;
  const VectorXd dw = oracle - fit.weights;
  d.term_a = (p.x_post - d.pi * p.x_pre) * dw;
  const VectorXd r_or = p.y_pre - p.x_pre * oracle;
  const VectorXd rpost_or = p.y_post - p.x_post * oracle;
  d.term_b = rpost_or - d.pi_offset - d.pi * r_or;
  d.prediction_error = p.y_post - fit.counterfactual;

  const VectorXd eta_pre = pp * r_or;
  const VectorXd eta_post = rpost_or - gnull * (p0 * r_or);
  d.tb_direct = eta_post - d.pi_offset - b * metric.smooth(eta_pre);
  return d;
}

GradientChannels gradient_channels(const HscFit& fit, const LatentPanel& latent,
                                   const VectorXd& oracle) {
  const Pieces p = pieces(latent);
  const BasisPtr basis = cached_basis(p.t0, fit.q);
  const RhoMetric<double> metric(basis, fit.rho);
  const MatrixXd w = metric.metric();
  const MatrixXd pp = basis->orth_projector();
  const VectorXd el = p.l1 - p.l0 * oracle;
  const VectorXd er = p.r1 - p.r0 * oracle;
  GradientChannels g;
  g.g1 = p.l0.transpose() * ((w - pp) * el);
  g.g2 = p.r0.transpose() * (w * el);
  g.g3 = p.x_pre.transpose() * (w * er);
  return g;
}

TransferNorm transfer_norm(const MatrixXd& c, const MatrixXd& q, double tol, int max_iter) {
  const Index n = q.rows();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
  if (es.info() != Eigen::Success) throw NumericalError("transfer_norm: eigensolver failed");
  const VectorXd lam = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  TransferNorm out;
  VectorXd inv_sqrt(n);
  double min_pos = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    if (lam(i) > cutoff) {
      inv_sqrt(i) = 1.0 / std::sqrt(lam(i));
      min_pos = std::min(min_pos, lam(i));
    } else {
      inv_sqrt(i) = 0.0;
      out.pseudo_inverse = true;
    }
  }
  out.lambda_max_qinv = std::isfinite(min_pos) ? 1.0 / min_pos : 0.0;
  const MatrixXd qis = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  const MatrixXd cq = c * qis;
  const MatrixXd m = cq.transpose() * cq;

  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + double(i) / double(n + 1);
  v.normalize();
  double lambda = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const VectorXd mv = m * v;
    const double norm = mv.norm();
    if (norm == 0.0) {
      lambda = 0.0;
      break;
    }
    const double next = v.dot(mv);
    v = mv / norm;
    if (std::abs(next - lambda) <= tol * std::abs(next)) {
      lambda = next;
      ++it;
      break;
    }
    lambda = next;
  }
  out.iterations = it;
  out.value = std::sqrt(std::max(lambda, 0.0));
  return out;
}

Channels channels(const HscFit& fit, const LatentPanel& latent, const VectorXd& oracle,
                  const AbDecomposition& ab) {
  const Pieces p = pieces(latent);
  const BasisPtr basis = cached_basis(p.t0, fit.q);
  const RhoMetric<double> metric(basis, fit.rho);
  const double t0 = static_cast<double>(p.t0);
  const MatrixXd w = metric.metric();

  MatrixXd q = p.x_pre.transpose() * w * p.x_pre / t0;
  q.diagonal().array() += fit.zeta * fit.zeta;
  q = (0.5 * (q + q.transpose())).eval();

  const MatrixXd c = p.x_post - ab.pi * p.x_pre;
  const TransferNorm tn = transfer_norm(c, q);

  // Dual norm through the (pseudo-)inverse of Q.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
  const VectorXd lam = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  auto dual = [&](const VectorXd& g) {
    const VectorXd z = es.eigenvectors().transpose() * g;
    double acc = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
      if (lam(i) > cutoff) acc += z(i) * z(i) / lam(i);
    }
    return std::sqrt(acc);
  };

  const GradientChannels g = gradient_channels(fit, latent, oracle);
  const VectorXd er = p.r1 - p.r0 * oracle;
  Channels ch;
  ch.a1 = dual(g.g1) / t0;
  ch.a2 = dual(g.g2) / t0;
  ch.a3 = std::sqrt(std::max(metric.quadform(er), 0.0) / t0);
  ch.lambda_max_qinv = tn.lambda_max_qinv;
  ch.transfer = tn.value;
  ch.envelope = tn.value * (ch.a1 + ch.a2 + ch.a3);
  ch.term_a_norm = ab.term_a.norm();
  ch.term_b_norm = ab.term_b.norm();
  ch.pseudo_inverse = tn.pseudo_inverse;
  ch.power_iterations = tn.iterations;
  return ch;
}

}  // namespace hsc
