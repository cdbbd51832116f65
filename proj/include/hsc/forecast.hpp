#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "hsc/basis_cache.hpp"

namespace hsc {

enum class RuleKind { constant, linear, ar, arima110, hamilton };

struct ForecastSpec {
  RuleKind kind = RuleKind::constant;
  int order = 4;  // AR order p, or the lag count of the Hamilton regression
};

// Tokens: last_constant, linear, arima110, ar, ar<p>, hamilton, hamilton<lags>.
ForecastSpec parse_forecaster(const std::string& token);
std::string forecaster_token(const ForecastSpec& spec);

// Shortest input series the rule can be fitted on for the given horizon.
Eigen::Index min_series_length(const ForecastSpec& spec, Eigen::Index horizon);

// A rule with its parameters frozen: forecast = offset + map * z.
struct FittedForecaster {
  ForecastSpec spec;
  Eigen::VectorXd params;
  Eigen::VectorXd offset;  // horizon
  Eigen::MatrixXd map;     // horizon x n
  bool degenerate = false; // all-zero input, parameters set to zero
  std::vector<std::string> warnings;

  Eigen::VectorXd apply(const Eigen::VectorXd& z) const { return offset + map * z; }
};

FittedForecaster fit_forecaster(const ForecastSpec& spec, const Eigen::VectorXd& z,
                                Eigen::Index horizon);
Eigen::VectorXd fit_and_forecast(const ForecastSpec& spec, const Eigen::VectorXd& z,
                                 Eigen::Index horizon);

// Linear map (horizon x n) continuing a null-space element: level repeat for
// q = 1, the fitted line for q = 2.
Eigen::MatrixXd null_continuation_map(Eigen::Index n, int q, Eigen::Index horizon);
Eigen::VectorXd null_continuation(const Eigen::VectorXd& x, int q, Eigen::Index horizon);

struct ComposedForecast {
  Eigen::VectorXd total;
  Eigen::VectorXd null_part;
  Eigen::VectorXd nonnull_part;
  FittedForecaster fitted;
};

// G(null) + G^(nonnull), where the two inputs are the P0 and P-perp pieces.
ComposedForecast compose_parts(const ForecastSpec& spec, int q, const Eigen::VectorXd& null_part,
                               const Eigen::VectorXd& nonnull_part, Eigen::Index horizon);

Eigen::VectorXd compose(const ForecastSpec& spec, int q, const Basis& basis,
                        const Eigen::VectorXd& r, Eigen::Index horizon);

}  // namespace hsc
