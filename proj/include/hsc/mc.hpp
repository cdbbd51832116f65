#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "hsc/baselines.hpp"
#include "hsc/decomp.hpp"
#include "hsc/estimator.hpp"
#include "hsc/tuning.hpp"

namespace hsc {

enum class Design { grid, simple };
Design parse_design(const std::string& token);
std::string design_name(Design d);

// Three-factor design with an integrated residual process E.
struct GridDgpConfig {
  Eigen::Index t0 = 200;
  Eigen::Index t_post = 20;
  Eigen::Index n0 = 50;
  double kappa = 0.0;
  double rho_u = 0.0;
  std::uint64_t residual_salt = 0;  // perturbs only the E streams
};

// One random-walk factor, unit-specific random-walk residuals, white noise.
struct SimpleDgpConfig {
  Eigen::Index t0 = 80;
  Eigen::Index t_post = 5;
  Eigen::Index n0 = 10;
  double kappa = 0.0;
  double loading_mean = 1.0;
  double loading_sd = 0.5;
  double noise_sd = 0.5;
};

// Components of the grid design held fixed across replications.
struct FrozenGrid {
  Eigen::MatrixXd loadings;         // n0 x 3
  Eigen::Vector3d treated_loading;  // sum over S of w*_j loadings_j
  Eigen::VectorXd alpha;            // n0 donor fixed effects
  Eigen::VectorXd omega_star;       // n0, zero outside S
  std::vector<Eigen::Index> support;
};

FrozenGrid frozen_grid(std::uint64_t seed, Eigen::Index n0);
LatentPanel draw_grid(const GridDgpConfig& cfg, const FrozenGrid& frozen, std::uint64_t seed,
                      std::uint64_t rep);
LatentPanel draw_simple(const SimpleDgpConfig& cfg, std::uint64_t seed, std::uint64_t rep);

struct MethodSpec {
  Method method = Method::hsc;
  Candidate hsc;  // used when method == hsc
  std::string label;
};

// sc | sc_int | sc_int_trend | diff_sc | sdid | hsc | hsc:q<k>:<forecaster>
MethodSpec parse_method_spec(const std::string& token);
std::vector<MethodSpec> parse_method_list(const std::string& list);

struct StudyConfig {
  Design design = Design::grid;
  GridDgpConfig grid;
  SimpleDgpConfig simple;
  std::vector<MethodSpec> methods;
  std::uint64_t reps = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  Eigen::Index cv_h = 1;
  Eigen::Index cv_folds = 10;
  std::vector<double> cv_grid = uniform_grid();
  ZetaSpec zeta;
  QPOptions qp;
};

struct RepRecord {
  std::uint64_t rep = 0;
  std::size_t method = 0;
  bool ok = false;
  std::string error;
  Eigen::VectorXd errors;  // counterfactual - untreated outcome, per post period
  double rho_hat = -1.0;   // selected rho for hsc methods
};

struct MethodMetrics {
  std::string label;
  double rmse = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  Eigen::VectorXd per_period_rmse;
  std::vector<double> rho_hat;
  double median_rho_hat = -1.0;
  std::size_t n_ok = 0;
  std::size_t failures = 0;
};

struct StudyResult {
  std::vector<RepRecord> records;  // rep-major, then method order
  std::vector<MethodMetrics> metrics;
};

MethodMetrics summarize(const std::string& label, const std::vector<const RepRecord*>& records);
double median(std::vector<double> v);

StudyResult run_study(const StudyConfig& cfg);

// Decomposition study over a rho grid on the simple design.
struct DecompConfig {
  SimpleDgpConfig dgp;
  std::uint64_t reps = 50;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<double> grid = decomposition_grid();
  int q = 1;
  ForecastSpec rule;
  ZetaSpec zeta;
  QPOptions qp;
};

struct DecompRow {
  std::uint64_t rep = 0;
  double rho = 0.0;
  double mse = 0.0;  // mean over horizons of squared prediction error
  Channels ch;
  double identity_gap = 0.0;  // max |A + B - prediction error|
  double tb_gap = 0.0;        // max |Term B - direct form|
};

struct DecompSummary {
  double rho = 0.0;
  double rmse = 0.0;
  double term_a = 0.0;
  double term_b = 0.0;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double lambda_max_qinv = 0.0;
  double transfer = 0.0;
  double envelope = 0.0;
};

struct DecompResult {
  std::vector<DecompRow> rows;  // rep-major, then grid order
  std::vector<DecompSummary> summary;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
};

DecompResult run_decomposition_study(const DecompConfig& cfg);

}  // namespace hsc
