#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "hsc/basis_cache.hpp"
#include "hsc/forecast.hpp"
#include "hsc/panel.hpp"
#include "hsc/qp.hpp"

namespace hsc {

struct ZetaSpec {
  bool automatic = true;
  double value = 0.0;
};

ZetaSpec parse_zeta(const std::string& token);

// Tpost^{1/4} times the sample sd of the first-differenced donor outcomes.
double auto_zeta(const Eigen::MatrixXd& x_pre, Eigen::Index t_post,
                 std::vector<std::string>* warnings = nullptr);
double resolve_zeta(const ZetaSpec& spec, const Eigen::MatrixXd& x_pre, Eigen::Index t_post,
                    std::vector<std::string>* warnings = nullptr);

struct HscConfig {
  double rho = 1.0;
  int q = 1;
  ForecastSpec forecaster;
  ZetaSpec zeta;
  QPOptions qp;
};

struct HscFit {
  double rho = 1.0;
  int q = 1;
  double zeta = 0.0;
  double ridge = 0.0;
  Eigen::VectorXd weights;
  Eigen::VectorXd r_pre;
  Eigen::VectorXd e_pre;  // smoothed residual S r
  Eigen::VectorXd u_pre;  // r - e
  Eigen::VectorXd counterfactual;
  Eigen::VectorXd donor_component;
  Eigen::VectorXd forecast_component;
  Eigen::VectorXd forecast_null;
  Eigen::VectorXd forecast_nonnull;
  FittedForecaster forecaster;
  double objective = 0.0;
  int qp_iterations = 0;
  double kkt_residual = 0.0;
  std::vector<std::string> warnings;
};

// One pre-period design projected onto the penalty eigenbasis, reusable
// across rho values.
class HscProblem {
 public:
  HscProblem(Eigen::VectorXd y_pre, Eigen::MatrixXd x_pre, Eigen::MatrixXd x_post, int q,
             double zeta);

  SimplexQP<double> qp(double rho) const;
  HscFit solve(double rho, const ForecastSpec& forecaster, const QPOptions& opts = {},
               const Eigen::VectorXd* warm_start = nullptr) const;

  const Basis& basis() const { return *basis_; }
  BasisPtr basis_ptr() const { return basis_; }
  int q() const { return q_; }
  double zeta() const { return zeta_; }
  double ridge() const { return ridge_; }
  const Eigen::VectorXd& y_pre() const { return y_pre_; }
  const Eigen::MatrixXd& x_pre() const { return x_pre_; }
  const Eigen::MatrixXd& x_post() const { return x_post_; }

 private:
  Eigen::VectorXd y_pre_;
  Eigen::MatrixXd x_pre_;
  Eigen::MatrixXd x_post_;
  int q_;
  double zeta_;
  double ridge_;
  BasisPtr basis_;
  Eigen::MatrixXd zx_;  // V' X_pre
  Eigen::VectorXd zy_;  // V' y_pre
};

HscFit fit(const PrePostView& view, const HscConfig& cfg);

struct EndpointReport {
  std::vector<double> rhos;
  std::vector<Eigen::VectorXd> counterfactuals;
  double drift_low = 0.0;
  double drift_high = 0.0;
  bool ok = false;
};

// Fits at rho in {0, 1e-6, 1 - 1e-6, 1} and reports the counterfactual drift
// at each end.
EndpointReport endpoint_check(const PrePostView& view, const HscConfig& cfg);

}  // namespace hsc
