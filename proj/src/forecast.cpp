#include "hsc/forecast.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "hsc/errors.hpp"

namespace hsc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* rule_name(RuleKind k) {
  switch (k) {
    case RuleKind::constant: return "last_constant";
    case RuleKind::linear: return "linear";
    case RuleKind::ar: return "ar";
    case RuleKind::arima110: return "arima110";
    case RuleKind::hamilton: return "hamilton";
  }
  return "?";
}

int parse_suffix(const std::string& token, std::size_t prefix, int fallback) {
  if (token.size() == prefix) return fallback;
  const std::string rest = token.substr(prefix);
  for (char ch : rest) {
    if (ch < '0' || ch > '9') throw ValidationError("unknown forecaster: " + token);
  }
  const int v = std::stoi(rest);
  if (v < 1) throw ValidationError("forecaster order must be >= 1: " + token);
  return v;
}

// Collinear regressors are accepted only when the fit is exact (e.g. a constant
// series); the minimum-norm solution then reproduces the fixed point.
VectorXd ols(const MatrixXd& design, const VectorXd& target, const char* rule,
             std::vector<std::string>& warnings) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() == design.cols()) return qr.solve(target);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(design);
  cod.setThreshold(1e-12);
  const VectorXd beta = cod.solve(target);
  if ((design * beta - target).norm() > 1e-10 * (1.0 + target.norm())) {
    throw NumericalError(std::string(rule) + ": singular regression matrix");
  }
  warnings.push_back(std::string(rule) + ": collinear regressors, minimum-norm exact fit");
  return beta;
}

void require_rows(Index rows, Index needed, const ForecastSpec& spec) {
  if (rows < needed) {
    throw ValidationError(std::string(rule_name(spec.kind)) + ": needs at least " +
                          std::to_string(needed) + " usable observations, has " +
                          std::to_string(rows));
  }
}

}  // namespace

ForecastSpec parse_forecaster(const std::string& token) {
  if (token == "last_constant" || token == "constant") return {RuleKind::constant, 0};
  if (token == "linear") return {RuleKind::linear, 0};
  if (token == "arima110") return {RuleKind::arima110, 1};
  if (token.rfind("hamilton", 0) == 0) return {RuleKind::hamilton, parse_suffix(token, 8, 4)};
  if (token.rfind("ar", 0) == 0) return {RuleKind::ar, parse_suffix(token, 2, 4)};
  throw ValidationError("unknown forecaster: " + token);
}

std::string forecaster_token(const ForecastSpec& spec) {
  switch (spec.kind) {
    case RuleKind::ar:
      return spec.order == 4 ? "ar" : "ar" + std::to_string(spec.order);
    case RuleKind::hamilton:
      return spec.order == 4 ? "hamilton" : "hamilton" + std::to_string(spec.order);
    default:
      return rule_name(spec.kind);
  }
}

Index min_series_length(const ForecastSpec& spec, Index horizon) {
  switch (spec.kind) {
    case RuleKind::constant: return 1;
    case RuleKind::linear: return 2;
    case RuleKind::arima110: return 5;  // 3 regression rows
    case RuleKind::ar: return 2 * spec.order + 2;
    case RuleKind::hamilton: return horizon + 2 * spec.order + 1;
  }
  return 1;
}

FittedForecaster fit_forecaster(const ForecastSpec& spec, const VectorXd& z, Index horizon) {
  if (horizon < 1) throw ValidationError("forecast horizon must be >= 1");
  const Index n = z.size();
  if (n < 1) throw ValidationError("forecast input is empty");
  FittedForecaster f;
  f.spec = spec;
  f.offset = VectorXd::Zero(horizon);
  f.map = MatrixXd::Zero(horizon, n);
  const bool zero_input = (z.array() == 0.0).all();

  switch (spec.kind) {
    case RuleKind::constant: {
      f.map.col(n - 1).setOnes();
      break;
    }
    case RuleKind::linear: {
      if (n < 2) throw ValidationError("linear: needs at least 2 observations");
      for (Index h = 0; h < horizon; ++h) {
        f.map(h, n - 1) = 1.0 + static_cast<double>(h + 1);
        f.map(h, n - 2) = -static_cast<double>(h + 1);
      }
      break;
    }
    case RuleKind::arima110: {
      require_rows(n - 2, 3, spec);
      double phi = 0.0;
      if (!zero_input) {
        double num = 0.0, den = 0.0, target = 0.0;
        for (Index t = 2; t < n; ++t) {
          const double d = z(t) - z(t - 1);
          const double dl = z(t - 1) - z(t - 2);
          num += d * dl;
          den += dl * dl;
          target += d * d;
        }
        // Regressors at round-off level relative to the differences carry no signal.
        const double scale = den + target;
        const double tiny = 1e-24 * scale;
        if (!(den > tiny)) {
          // Only a flat difference series fits exactly; phi = 0 is its minimum-norm fit.
          if (target > tiny) throw NumericalError("arima110: singular regression matrix");
          if (scale > 0.0) f.warnings.push_back("arima110: collinear regressors, minimum-norm exact fit");
        } else {
          phi = num / den;
        }
        if (std::abs(phi) >= 1.0) f.warnings.push_back("arima110: |phi| >= 1, explosive forecast");
      } else {
        f.degenerate = true;
      }
      f.params = VectorXd::Constant(1, phi);
      double cum = 0.0, pw = 1.0;
      for (Index h = 0; h < horizon; ++h) {
        pw *= phi;
        cum += pw;
        f.map(h, n - 1) = 1.0 + cum;
        f.map(h, n - 2) = -cum;
      }
      break;
    }
    case RuleKind::ar: {
      const int p = spec.order;
      require_rows(n - p, p + 2, spec);
      VectorXd beta = VectorXd::Zero(p + 1);
      if (!zero_input) {
        const Index rows = n - p;
        MatrixXd design(rows, p + 1);
        VectorXd target(rows);
        for (Index r = 0; r < rows; ++r) {
          const Index t = r + p;
          target(r) = z(t);
          design(r, 0) = 1.0;
          for (int k = 1; k <= p; ++k) design(r, k) = z(t - k);
        }
        beta = ols(design, target, "ar", f.warnings);
        MatrixXd companion = MatrixXd::Zero(p, p);
        companion.row(0) = beta.tail(p).transpose();
        if (p > 1) companion.bottomLeftCorner(p - 1, p - 1).setIdentity();
        const double radius = companion.eigenvalues().cwiseAbs().maxCoeff();
        if (radius >= 1.0) f.warnings.push_back("ar: characteristic root on or outside unit circle");
      } else {
        f.degenerate = true;
      }
      f.params = beta;
      // Each forecast as an affine function of z, built by the AR recursion.
      std::vector<VectorXd> rows_map;
      std::vector<double> consts;
      auto lagged = [&](Index step, int k, VectorXd& coef, double& c0) {
        const Index j = step - k;  // forecast index (0-based) of the lag
        if (j >= 0) {
          coef = rows_map[static_cast<std::size_t>(j)];
          c0 = consts[static_cast<std::size_t>(j)];
        } else {
          coef = VectorXd::Zero(n);
          coef(n + j) = 1.0;
          c0 = 0.0;
        }
      };
      for (Index h = 0; h < horizon; ++h) {
        VectorXd coef = VectorXd::Zero(n);
        double c0 = beta(0);
        for (int k = 1; k <= p; ++k) {
          VectorXd lc;
          double lk;
          lagged(h, k, lc, lk);
          coef += beta(k) * lc;
          c0 += beta(k) * lk;
        }
        rows_map.push_back(coef);
        consts.push_back(c0);
        f.map.row(h) = coef.transpose();
        f.offset(h) = c0;
      }
      break;
    }
    case RuleKind::hamilton: {
      const int lags = spec.order;
      f.params = VectorXd::Zero(horizon * (lags + 1));
      for (Index h = 1; h <= horizon; ++h) {
        const Index rows = n - h - lags + 1;
        require_rows(rows, lags + 2, spec);
        VectorXd beta = VectorXd::Zero(lags + 1);
        if (!zero_input) {
          MatrixXd design(rows, lags + 1);
          VectorXd target(rows);
          for (Index r = 0; r < rows; ++r) {
            const Index t = r + lags - 1;
            target(r) = z(t + h);
            design(r, 0) = 1.0;
            for (int k = 0; k < lags; ++k) design(r, k + 1) = z(t - k);
          }
          beta = ols(design, target, "hamilton", f.warnings);
        } else {
          f.degenerate = true;
        }
        f.params.segment((h - 1) * (lags + 1), lags + 1) = beta;
        f.offset(h - 1) = beta(0);
        for (int k = 0; k < lags; ++k) f.map(h - 1, n - 1 - k) = beta(k + 1);
      }
      break;
    }
  }
  return f;
}

VectorXd fit_and_forecast(const ForecastSpec& spec, const VectorXd& z, Index horizon) {
  return fit_forecaster(spec, z, horizon).apply(z);
}

MatrixXd null_continuation_map(Index n, int q, Index horizon) {
  if (q != 1 && q != 2) throw ValidationError("q must be 1 or 2");
  if (n < q) throw ValidationError("null continuation: series too short");
  MatrixXd m(horizon, n);
  if (q == 1) {
    m.setConstant(1.0 / static_cast<double>(n));
    return m;
  }
  MatrixXd design(n, 2);
  for (Index t = 0; t < n; ++t) {
    design(t, 0) = 1.0;
    design(t, 1) = static_cast<double>(t + 1);
  }
  const MatrixXd solver = (design.transpose() * design).ldlt().solve(design.transpose());
  for (Index h = 0; h < horizon; ++h) {
    Eigen::RowVector2d at(1.0, static_cast<double>(n + h + 1));
    m.row(h) = at * solver;
  }
  return m;
}

VectorXd null_continuation(const VectorXd& x, int q, Index horizon) {
  const Index n = x.size();
  // Reconstruct x from its own fit over the sample to check membership.
  MatrixXd in_sample(n, n);
  if (q == 1) {
    in_sample.setConstant(1.0 / static_cast<double>(n));
  } else {
    MatrixXd design(n, 2);
    for (Index t = 0; t < n; ++t) {
      design(t, 0) = 1.0;
      design(t, 1) = static_cast<double>(t + 1);
    }
    in_sample = design * (design.transpose() * design).ldlt().solve(design.transpose());
  }
  const double resid = (x - in_sample * x).cwiseAbs().maxCoeff();
  if (resid > 1e-6 * (1.0 + x.cwiseAbs().maxCoeff())) {
    throw ValidationError("null continuation: input is not in the penalty null space");
  }
  return null_continuation_map(n, q, horizon) * x;
}

ComposedForecast compose_parts(const ForecastSpec& spec, int q, const VectorXd& null_part,
                               const VectorXd& nonnull_part, Index horizon) {
  ComposedForecast out;
  out.null_part = null_continuation(null_part, q, horizon);
  out.fitted = fit_forecaster(spec, nonnull_part, horizon);
  out.nonnull_part = out.fitted.apply(nonnull_part);
  out.total = out.null_part + out.nonnull_part;
  return out;
}

VectorXd compose(const ForecastSpec& spec, int q, const Basis& basis, const VectorXd& r,
                 Index horizon) {
  if (basis.q != q || basis.n != r.size()) throw ValidationError("compose: basis mismatch");
  const VectorXd null_part = basis.null_projector() * r;
  return compose_parts(spec, q, null_part, r - null_part, horizon).total;
}

}  // namespace hsc
