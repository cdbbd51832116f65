#include "hsc/tuning.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hsc/errors.hpp"
#include "hsc/parallel.hpp"

namespace hsc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> uniform_grid(int points) {
  if (points < 2) throw ValidationError("grid needs at least 2 points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = double(i) / double(points - 1);
  g.back() = 1.0;
  return g;
}

std::vector<double> log_lambda_grid(int n_points) {
  if (n_points < 3) throw ValidationError("log-lambda grid needs at least 3 points");
  std::vector<double> g;
  g.push_back(0.0);
  const int inner = n_points - 2;
  for (int i = 0; i < inner; ++i) {
    const double expo = inner == 1 ? 0.0 : -3.0 + 6.0 * double(i) / double(inner - 1);
    const double lambda = std::pow(10.0, expo);
    g.push_back(lambda / (1.0 + lambda));
  }
  g.push_back(1.0);
  return g;
}

std::vector<double> parse_grid(const std::string& token) {
  if (token == "uniform21" || token == "uniform") return uniform_grid(21);
  if (token == "loglambda" || token == "log_lambda") return log_lambda_grid(21);
  throw ValidationError("unknown grid: " + token);
}

std::vector<Candidate> parse_candidates(const std::string& list) {
  std::vector<Candidate> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon < 2 || item[0] != 'q') {
      throw ValidationError("candidate must look like q1:last_constant, got " + item);
    }
    const std::string qs = item.substr(1, colon - 1);
    if (qs != "1" && qs != "2") throw ValidationError("candidate q must be 1 or 2: " + item);
    Candidate c;
    c.q = qs == "1" ? 1 : 2;
    c.rule = parse_forecaster(item.substr(colon + 1));
    out.push_back(c);
  }
  if (out.empty()) throw ValidationError("empty candidate list");
  return out;
}

std::string candidate_token(const Candidate& c) {
  return "q" + std::to_string(c.q) + ":" + forecaster_token(c.rule);
}

std::vector<Index> rolling_origins(Index t0, Index h, Index folds, Index min_train) {
  if (h < 1) throw ValidationError("cv horizon h must be >= 1");
  if (folds < 1) throw ValidationError("cv needs at least one fold");
  const Index largest = t0 - h - min_train + 1;
  if (t0 - h - folds + 1 < min_train) {
    throw ValidationError("insufficient pre-period for " + std::to_string(folds) +
                          " folds at h=" + std::to_string(h) + "; largest feasible L is " +
                          std::to_string(std::max<Index>(largest, 0)));
  }
  std::vector<Index> ks;
  for (Index l = 1; l <= folds; ++l) ks.push_back(t0 - h - folds + l);
  return ks;
}

CvResult cross_validate(const PreTreatmentView& pre, const CvPlan& plan, const ZetaSpec& zeta) {
  const Index t0 = pre.y_pre.size();
  if (pre.x_pre.rows() != t0) throw ValidationError("cv: y_pre and X_pre differ in length");
  if (plan.grid.empty()) throw ValidationError("cv: empty rho grid");
  if (plan.candidates.empty()) throw ValidationError("cv: no candidates");
  for (double r : plan.grid) check_rho(r);

  Index min_train = 2;
  for (const auto& c : plan.candidates) {
    min_train = std::max<Index>(min_train, c.q + 2);
    min_train = std::max<Index>(min_train, min_series_length(c.rule, plan.h));
  }
  Index folds = plan.folds;
  if (plan.first_origin) {
    if (*plan.first_origin < min_train) {
      throw ValidationError("cv: first origin " + std::to_string(*plan.first_origin) +
                            " is below the minimum training length " + std::to_string(min_train));
    }
    folds = t0 - plan.h - *plan.first_origin + 1;
  }

  CvResult res;
  res.grid = plan.grid;
  res.candidates = plan.candidates;
  res.origins = rolling_origins(t0, plan.h, folds, min_train);
  const std::size_t nc = plan.candidates.size();
  const std::size_t nf = res.origins.size();
  const Index ng = static_cast<Index>(plan.grid.size());
  const Index h = plan.h;

  struct Task {
    MatrixXd err;  // h x grid
    bool ok = true;
    std::string reason;
  };
  std::vector<Task> tasks(nc * nf);
  parallel_for(tasks.size(), plan.threads, [&](std::size_t idx) {
    const std::size_t ci = idx / nf;
    const std::size_t fi = idx % nf;
    const Candidate& cand = plan.candidates[ci];
    const Index k = res.origins[fi];
    Task& task = tasks[idx];
    task.err.resize(h, ng);
    try {
      const MatrixXd x_train = pre.x_pre.topRows(k);
      const double z = resolve_zeta(zeta, x_train, pre.t_post);
      const HscProblem problem(pre.y_pre.head(k), x_train, pre.x_pre.middleRows(k, h), cand.q, z);
      const VectorXd target = pre.y_pre.segment(k, h);
      VectorXd warm;
      for (Index g = 0; g < ng; ++g) {
        const HscFit f = problem.solve(plan.grid[static_cast<std::size_t>(g)], cand.rule, plan.qp,
                                       g > 0 ? &warm : nullptr);
        warm = f.weights;
        task.err.col(g) = f.counterfactual - target;
      }
    } catch (const std::exception& e) {
      task.ok = false;
      task.reason = "fold k=" + std::to_string(k) + ": " + e.what();
    }
  });

  res.cv = MatrixXd::Constant(ng, static_cast<Index>(nc), std::numeric_limits<double>::quiet_NaN());
  res.valid.assign(nc, true);
  res.invalid_reason.assign(nc, "");
  res.errors.resize(nc);
  for (std::size_t ci = 0; ci < nc; ++ci) {
    MatrixXd all(static_cast<Index>(nf) * h, ng);
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const Task& task = tasks[ci * nf + fi];
      if (!task.ok) {
        if (res.valid[ci]) res.invalid_reason[ci] = task.reason;
        res.valid[ci] = false;
        all.middleRows(static_cast<Index>(fi) * h, h).setConstant(std::numeric_limits<double>::quiet_NaN());
      } else {
        all.middleRows(static_cast<Index>(fi) * h, h) = task.err;
      }
    }
    res.errors[ci] = all;
    if (res.valid[ci]) {
      for (Index g = 0; g < ng; ++g) res.cv(g, static_cast<Index>(ci)) = all.col(g).squaredNorm() / double(all.rows());
    }
  }

  // Smallest CV; near-ties go to the larger rho, then to the earlier candidate.
  const double scale = 1.0 + pre.y_pre.squaredNorm() / double(t0);
  const double abs_tol = 1e-12 * scale;
  bool found = false;
  for (std::size_t ci = 0; ci < nc; ++ci) {
    if (!res.valid[ci]) continue;
    for (Index g = 0; g < ng; ++g) {
      const double v = res.cv(g, static_cast<Index>(ci));
      const double rho = plan.grid[static_cast<std::size_t>(g)];
      if (!std::isfinite(v)) continue;
      if (!found) {
        found = true;
        res.best_cv = v;
        res.best_rho = rho;
        res.best_candidate = ci;
        continue;
      }
      const double tol = abs_tol + 1e-9 * std::max(std::abs(v), std::abs(res.best_cv));
      const bool better = v < res.best_cv - tol;
      const bool tie_larger = std::abs(v - res.best_cv) <= tol && rho > res.best_rho;
      if (better || tie_larger) {
        res.best_cv = v;
        res.best_rho = rho;
        res.best_candidate = ci;
      }
    }
  }
  if (!found) {
    std::string why = "cv: every candidate failed";
    if (!res.invalid_reason.empty()) why += " (" + res.invalid_reason.front() + ")";
    throw NumericalError(why);
  }
  return res;
}

}  // namespace hsc
