#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "hsc/estimator.hpp"
#include "hsc/forecast.hpp"
#include "hsc/panel.hpp"
#include "hsc/qp.hpp"

namespace hsc {

std::vector<double> uniform_grid(int points = 21);
// {0} u {lambda / (1 + lambda)} u {1}, lambda log-spaced on [1e-3, 1e3];
// n_points counts both endpoints.
std::vector<double> log_lambda_grid(int n_points = 21);
std::vector<double> parse_grid(const std::string& token);

struct Candidate {
  int q = 1;
  ForecastSpec rule;
};

// Comma-separated q<k>:<forecaster> tokens, e.g. "q1:last_constant,q2:arima110".
std::vector<Candidate> parse_candidates(const std::string& list);
std::string candidate_token(const Candidate& c);

struct CvPlan {
  Eigen::Index h = 1;
  Eigen::Index folds = 10;
  // Alternative to `folds`: the first training length. Every origin from
  // there to t0 - h is used.
  std::optional<Eigen::Index> first_origin;
  std::vector<double> grid = uniform_grid();
  std::vector<Candidate> candidates = {Candidate{}};
  QPOptions qp;
  int threads = 1;
};

// Training lengths k_1 < ... < k_L with k_L + h = t0.
std::vector<Eigen::Index> rolling_origins(Eigen::Index t0, Eigen::Index h, Eigen::Index folds,
                                          Eigen::Index min_train);

struct CvResult {
  std::vector<double> grid;
  std::vector<Candidate> candidates;
  std::vector<Eigen::Index> origins;
  Eigen::MatrixXd cv;  // grid x candidates, NaN where the candidate is invalid
  std::vector<bool> valid;
  std::vector<std::string> invalid_reason;
  // Per candidate: forecast errors (counterfactual - observed), rows are
  // fold-major (fold, horizon), columns follow the grid.
  std::vector<Eigen::MatrixXd> errors;
  double best_rho = 1.0;
  std::size_t best_candidate = 0;
  double best_cv = 0.0;
};

CvResult cross_validate(const PreTreatmentView& pre, const CvPlan& plan, const ZetaSpec& zeta);

}  // namespace hsc
