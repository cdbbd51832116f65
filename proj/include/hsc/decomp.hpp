#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hsc/estimator.hpp"
#include "hsc/panel.hpp"

namespace hsc {

// Outcomes split as Y = L + R: a systematic part L and a residual part R.
// Column 0 is the treated unit; rows are periods; the first t0 rows are pre.
struct LatentPanel {
  Eigen::MatrixXd systematic;
  Eigen::MatrixXd residual;
  Eigen::Index t0 = 0;

  Eigen::MatrixXd outcomes() const { return systematic + residual; }
  PrePostView view() const;
};

// 19-point rho grid used by the decomposition study.
std::vector<double> decomposition_grid();

// Oracle weights: the rho = 1 program on the systematic part L, with the
// same zeta and the same null space (q) as the fit being analysed.
Eigen::VectorXd oracle_weights(const LatentPanel& latent, int q, double zeta,
                               const QPOptions& opts = {});

struct AbDecomposition {
  Eigen::VectorXd term_a;
  Eigen::VectorXd term_b;
  Eigen::VectorXd tb_direct;         // Term B through the residual-forecast form
  Eigen::VectorXd prediction_error;  // Y_post - counterfactual
  Eigen::MatrixXd pi;                // Tpost x T0 linear part of the residual forecast
  Eigen::VectorXd pi_offset;         // intercept part (zero for intercept-free rules)
};

// Materialises the fitted forecaster as Pi = (G_null P0 + B P_perp) S with the
// parameters frozen at `fit`, then splits the prediction error.
AbDecomposition ab_decompose(const HscFit& fit, const LatentPanel& latent,
                             const Eigen::VectorXd& oracle);

struct GradientChannels {
  Eigen::VectorXd g1;  // L0' (W - P_perp) e^L
  Eigen::VectorXd g2;  // R0' W e^L
  Eigen::VectorXd g3;  // X' W e^R
};

GradientChannels gradient_channels(const HscFit& fit, const LatentPanel& latent,
                                   const Eigen::VectorXd& oracle);

struct Channels {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double lambda_max_qinv = 0.0;
  double transfer = 0.0;
  double envelope = 0.0;
  double term_a_norm = 0.0;
  double term_b_norm = 0.0;
  bool pseudo_inverse = false;  // Q was singular (zeta = 0)
  int power_iterations = 0;
};

Channels channels(const HscFit& fit, const LatentPanel& latent, const Eigen::VectorXd& oracle,
                  const AbDecomposition& ab);

// Operator norm ||C Q^{-1/2}|| by power iteration on Q^{-1/2} C'C Q^{-1/2}.
struct TransferNorm {
  double value = 0.0;
  double lambda_max_qinv = 0.0;
  bool pseudo_inverse = false;
  int iterations = 0;
};
TransferNorm transfer_norm(const Eigen::MatrixXd& c, const Eigen::MatrixXd& q,
                           double tol = 1e-10, int max_iter = 10000);

}  // namespace hsc
