#pragma once

#include <Eigen/Dense>

#include <string>

#include "hsc/panel.hpp"
#include "hsc/qp.hpp"

namespace hsc {

enum class Method { sc, sc_int, sc_int_trend, diff_sc, sdid, hsc };

Method parse_method(const std::string& token);
std::string method_name(Method m);

struct BaselineFit {
  Method method = Method::sc;
  Eigen::VectorXd weights;
  Eigen::VectorXd counterfactual;
  double intercept = 0.0;  // sc_int, sc_int_trend
  double slope = 0.0;      // sc_int_trend, per period
  Eigen::VectorXd time_weights;  // sdid
  bool time_weights_converged = true;
  double zeta = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Level-matching SC, identity metric.
BaselineFit fit_sc(const PrePostView& view, double ridge = 0.0, const QPOptions& opts = {});

// SC with a free intercept (and optionally a linear trend), obtained by
// residualising outcomes on [1] or [1, t] before the simplex fit.
BaselineFit fit_sc_int(const PrePostView& view, double ridge = 0.0, bool with_trend = false,
                       const QPOptions& opts = {});

// SC on first differences, re-levelled at the last pre period.
BaselineFit fit_diff_sc(const PrePostView& view, double ridge = 0.0, const QPOptions& opts = {});

// Synthetic difference-in-differences with per-period counterfactuals.
BaselineFit fit_sdid(const PrePostView& view, const QPOptions& opts = {});

}  // namespace hsc
