#include "hsc/baselines.hpp"

#include "hsc/errors.hpp"
#include "hsc/estimator.hpp"

namespace hsc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd time_design(Index t0, bool with_trend) {
  MatrixXd h(t0, with_trend ? 2 : 1);
  for (Index t = 0; t < t0; ++t) {
    h(t, 0) = 1.0;
    if (with_trend) h(t, 1) = static_cast<double>(t + 1);
  }
  return h;
}

void check_view(const PrePostView& v) {
  if (v.x_pre.cols() < 2) throw ValidationError("need at least 2 donors");
  if (v.y_pre.size() != v.x_pre.rows() || v.x_post.cols() != v.x_pre.cols()) {
    throw ValidationError("view dimension mismatch");
  }
  if (v.t_post() < 1) throw ValidationError("no post-treatment periods");
}

SimplexQP<double> identity_qp(const VectorXd& y, const MatrixXd& x, double ridge) {
  if (!(ridge >= 0.0)) throw ValidationError("ridge must be >= 0");
  SimplexQP<double> qp;
  qp.gram = x.transpose() * x;
  qp.linear = -(x.transpose() * y);
  qp.offset = y.squaredNorm();
  qp.ridge = ridge;
  return qp;
}

}  // namespace

Method parse_method(const std::string& token) {
  if (token == "sc") return Method::sc;
  if (token == "sc_int") return Method::sc_int;
  if (token == "sc_int_trend") return Method::sc_int_trend;
  if (token == "diff_sc") return Method::diff_sc;
  if (token == "sdid") return Method::sdid;
  if (token == "hsc") return Method::hsc;
  throw ValidationError("unknown method: " + token);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::sc: return "sc";
    case Method::sc_int: return "sc_int";
    case Method::sc_int_trend: return "sc_int_trend";
    case Method::diff_sc: return "diff_sc";
    case Method::sdid: return "sdid";
    case Method::hsc: return "hsc";
  }
  return "?";
}

BaselineFit fit_sc(const PrePostView& view, double ridge, const QPOptions& opts) {
  check_view(view);
  const auto sol = solve(identity_qp(view.y_pre, view.x_pre, ridge), opts);
  BaselineFit f;
  f.method = Method::sc;
  f.weights = sol.weights;
  f.kkt_residual = sol.kkt_residual;
  f.iterations = sol.iterations;
  f.counterfactual = view.x_post * f.weights;
  return f;
}

BaselineFit fit_sc_int(const PrePostView& view, double ridge, bool with_trend,
                       const QPOptions& opts) {
  check_view(view);
  const Index t0 = view.t0();
  const MatrixXd h = time_design(t0, with_trend);
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(h);
  const VectorXd yc = view.y_pre - h * qr.solve(view.y_pre);
  const MatrixXd xc = view.x_pre - h * qr.solve(view.x_pre);
  const auto sol = solve(identity_qp(yc, xc, ridge), opts);
  BaselineFit f;
  f.method = with_trend ? Method::sc_int_trend : Method::sc_int;
  f.weights = sol.weights;
  f.kkt_residual = sol.kkt_residual;
  f.iterations = sol.iterations;
  const VectorXd coef = qr.solve((view.y_pre - view.x_pre * f.weights).eval());
  f.intercept = coef(0);
  f.slope = with_trend ? coef(1) : 0.0;
  f.counterfactual = view.x_post * f.weights;
  for (Index s = 0; s < view.t_post(); ++s) {
    f.counterfactual(s) += f.intercept + f.slope * static_cast<double>(t0 + s + 1);
  }
  return f;
}

BaselineFit fit_diff_sc(const PrePostView& view, double ridge, const QPOptions& opts) {
  check_view(view);
  const Index t0 = view.t0();
  const VectorXd dy = view.y_pre.tail(t0 - 1) - view.y_pre.head(t0 - 1);
  const MatrixXd dx = view.x_pre.bottomRows(t0 - 1) - view.x_pre.topRows(t0 - 1);
  const auto sol = solve(identity_qp(dy, dx, ridge), opts);
  BaselineFit f;
  f.method = Method::diff_sc;
  f.weights = sol.weights;
  f.kkt_residual = sol.kkt_residual;
  f.iterations = sol.iterations;
  const double level = view.y_pre(t0 - 1) - view.x_pre.row(t0 - 1).dot(f.weights);
  f.intercept = level;
  f.counterfactual = (view.x_post * f.weights).array() + level;
  return f;
}

BaselineFit fit_sdid(const PrePostView& view, const QPOptions& opts) {
  check_view(view);
  const double zeta = auto_zeta(view.x_pre, view.t_post());
  const double ridge = zeta * zeta * static_cast<double>(view.t0());
  BaselineFit f = fit_sc_int(view, ridge, false, opts);
  f.method = Method::sdid;
  f.zeta = zeta;

  // Time weights: simplex regression (with intercept) of each donor's mean
  // post level on its pre-period path. Rows are donors.
  const MatrixXd a = view.x_pre.transpose();
  const VectorXd b = view.x_post.colwise().mean().transpose();
  const MatrixXd ac = a.rowwise() - a.colwise().mean();
  const VectorXd bc = b.array() - b.mean();
  const auto tqp = identity_qp(bc, ac, 0.0);
  QPOptions topts = opts;
  topts.max_iter = std::min(opts.max_iter, 20000);
  try {
    f.time_weights = solve(tqp, topts).weights;
  } catch (const QpNotConverged<double>& e) {
    // Zero ridge leaves the time-weight program without a unique optimum;
    // keep the best iterate.
    f.time_weights = e.best().weights;
    f.time_weights_converged = false;
  }
  const VectorXd r = view.y_pre - view.x_pre * f.weights;
  const double shift = f.time_weights.dot(r);
  f.intercept = shift;
  f.counterfactual = (view.x_post * f.weights).array() + shift;
  return f;
}

}  // namespace hsc
