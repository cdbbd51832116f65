#include "hsc/estimator.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "hsc/errors.hpp"

namespace hsc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ZetaSpec parse_zeta(const std::string& token) {
  if (token == "auto") return {true, 0.0};
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty() || !std::isfinite(v) || v < 0.0) {
    throw ValidationError("zeta must be 'auto' or a non-negative number: " + token);
  }
  return {false, v};
}

double auto_zeta(const MatrixXd& x_pre, Index t_post, std::vector<std::string>* warnings) {
  if (x_pre.rows() < 2) throw ValidationError("auto zeta needs at least 2 pre periods");
  if (t_post < 1) throw ValidationError("auto zeta needs t_post >= 1");
  const MatrixXd d = x_pre.bottomRows(x_pre.rows() - 1) - x_pre.topRows(x_pre.rows() - 1);
  const double m = d.mean();
  const double count = static_cast<double>(d.size());
  double sd = 0.0;
  if (d.size() > 1) sd = std::sqrt((d.array() - m).square().sum() / (count - 1.0));
  if (sd == 0.0 && warnings != nullptr) {
    warnings->push_back("auto zeta is zero: donor first differences have no variation");
  }
  return std::pow(static_cast<double>(t_post), 0.25) * sd;
}

double resolve_zeta(const ZetaSpec& spec, const MatrixXd& x_pre, Index t_post,
                    std::vector<std::string>* warnings) {
  return spec.automatic ? auto_zeta(x_pre, t_post, warnings) : spec.value;
}

HscProblem::HscProblem(VectorXd y_pre, MatrixXd x_pre, MatrixXd x_post, int q, double zeta)
    : y_pre_(std::move(y_pre)),
      x_pre_(std::move(x_pre)),
      x_post_(std::move(x_post)),
      q_(q),
      zeta_(zeta) {
  if (q_ != 1 && q_ != 2) throw ValidationError("q must be 1 or 2");
  if (y_pre_.size() != x_pre_.rows()) throw ValidationError("y_pre and X_pre differ in length");
  if (x_post_.cols() != x_pre_.cols()) throw ValidationError("X_pre and X_post donor mismatch");
  if (x_pre_.cols() < 2) throw ValidationError("need at least 2 donors");
  if (!(zeta_ >= 0.0) || !std::isfinite(zeta_)) throw ValidationError("zeta must be >= 0");
  if (y_pre_.size() < q_ + 2) {
    throw ValidationError("need at least q + 2 pre-treatment periods");
  }
  ridge_ = zeta_ * zeta_ * static_cast<double>(y_pre_.size());
  basis_ = cached_basis(y_pre_.size(), q_);
  zx_ = basis_->eigenvectors.transpose() * x_pre_;
  zy_ = basis_->eigenvectors.transpose() * y_pre_;
}

SimplexQP<double> HscProblem::qp(double rho) const {
  const RhoMetric<double> metric(basis_, rho);
  const VectorXd root = metric.match().cwiseSqrt();
  const MatrixXd a = root.asDiagonal() * zx_;
  const VectorXd b = root.cwiseProduct(zy_);
  SimplexQP<double> p;
  p.gram = a.transpose() * a;
  p.linear = -(a.transpose() * b);
  p.offset = b.squaredNorm();
  p.ridge = ridge_;
  return p;
}

HscFit HscProblem::solve(double rho, const ForecastSpec& forecaster, const QPOptions& opts,
                         const VectorXd* warm_start) const {
  const RhoMetric<double> metric(basis_, rho);
  const SimplexQP<double> program = qp(rho);
  const QPSolution<double> sol = hsc::solve(program, opts, warm_start);

  HscFit f;
  f.rho = rho;
  f.q = q_;
  f.zeta = zeta_;
  f.ridge = ridge_;
  f.weights = sol.weights;
  f.objective = sol.objective;
  f.qp_iterations = sol.iterations;
  f.kkt_residual = sol.kkt_residual;

  const MatrixXd& v = basis_->eigenvectors;
  const Index n = basis_->n;
  const int nd = basis_->null_dim;
  const VectorXd coords = zy_ - zx_ * f.weights;  // V' r
  const VectorXd smoothed = metric.shrink().cwiseProduct(coords);
  f.r_pre = y_pre_ - x_pre_ * f.weights;
  f.e_pre = v * smoothed;
  f.u_pre = f.r_pre - f.e_pre;

  const VectorXd null_part = v.leftCols(nd) * coords.head(nd);
  const VectorXd nonnull_part = v.rightCols(n - nd) * smoothed.tail(n - nd);
  ComposedForecast cf = compose_parts(forecaster, q_, null_part, nonnull_part, x_post_.rows());
  f.forecast_null = std::move(cf.null_part);
  f.forecast_nonnull = std::move(cf.nonnull_part);
  f.forecast_component = std::move(cf.total);
  f.forecaster = std::move(cf.fitted);
  f.warnings = f.forecaster.warnings;
  f.donor_component = x_post_ * f.weights;
  f.counterfactual = f.donor_component + f.forecast_component;
  return f;
}

HscFit fit(const PrePostView& view, const HscConfig& cfg) {
  check_rho(cfg.rho);
  std::vector<std::string> warnings;
  const double zeta = resolve_zeta(cfg.zeta, view.x_pre, view.t_post(), &warnings);
  const HscProblem problem(view.y_pre, view.x_pre, view.x_post, cfg.q, zeta);
  HscFit f = problem.solve(cfg.rho, cfg.forecaster, cfg.qp);
  f.warnings.insert(f.warnings.begin(), warnings.begin(), warnings.end());
  return f;
}

EndpointReport endpoint_check(const PrePostView& view, const HscConfig& cfg) {
  const double zeta = resolve_zeta(cfg.zeta, view.x_pre, view.t_post());
  const HscProblem problem(view.y_pre, view.x_pre, view.x_post, cfg.q, zeta);
  EndpointReport rep;
  rep.rhos = {0.0, 1e-6, 1.0 - 1e-6, 1.0};
  for (double rho : rep.rhos) {
    rep.counterfactuals.push_back(problem.solve(rho, cfg.forecaster, cfg.qp).counterfactual);
  }
  rep.drift_low = (rep.counterfactuals[1] - rep.counterfactuals[0]).cwiseAbs().maxCoeff();
  rep.drift_high = (rep.counterfactuals[2] - rep.counterfactuals[3]).cwiseAbs().maxCoeff();
  rep.ok = rep.drift_low < 1e-3 && rep.drift_high < 1e-3;
  return rep;
}

}  // namespace hsc
