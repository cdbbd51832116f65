#include "hsc/mc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hsc/errors.hpp"
#include "hsc/parallel.hpp"
#include "hsc/rng.hpp"

namespace hsc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Design parse_design(const std::string& token) {
  if (token == "grid") return Design::grid;
  if (token == "simple") return Design::simple;
  throw ValidationError("unknown design: " + token);
}

std::string design_name(Design d) { return d == Design::grid ? "grid" : "simple"; }

namespace {

class Normal {
 public:
  explicit Normal(KeyedRng rng) : rng_(rng) {}
  double operator()(double sd = 1.0) { return sd * dist_(rng_); }

 private:
  KeyedRng rng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

constexpr double kPhiResidual = 0.25;

}  // namespace

FrozenGrid frozen_grid(std::uint64_t seed, Index n0) {
  if (n0 < 2) throw ValidationError("grid design needs at least 2 donors");
  FrozenGrid f;
  Normal load(make_stream(seed, 0.0, 0.0, 0, "frozen:loadings"));
  f.loadings.resize(n0, 3);
  for (Index j = 0; j < n0; ++j) {
    for (Index k = 0; k < 3; ++k) {
      double v;
      do {
        v = load(0.5);
      } while (std::abs(v) > 2.0);
      f.loadings(j, k) = v;
    }
  }
  KeyedRng alpha_rng = make_stream(seed, 0.0, 0.0, 0, "frozen:alpha");
  std::uniform_real_distribution<double> unif(5.0, 15.0);
  f.alpha.resize(n0);
  for (Index j = 0; j < n0; ++j) f.alpha(j) = unif(alpha_rng);

  KeyedRng pick = make_stream(seed, 0.0, 0.0, 0, "frozen:support");
  std::vector<Index> idx(static_cast<std::size_t>(n0));
  for (Index j = 0; j < n0; ++j) idx[static_cast<std::size_t>(j)] = j;
  const std::size_t s = std::min<std::size_t>(8, static_cast<std::size_t>(n0));
  for (std::size_t i = 0; i < s; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
    std::swap(idx[i], idx[d(pick)]);
  }
  f.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s));
  std::sort(f.support.begin(), f.support.end());

  KeyedRng dir = make_stream(seed, 0.0, 0.0, 0, "frozen:dirichlet");
  std::gamma_distribution<double> gam(1.0, 1.0);
  f.omega_star = VectorXd::Zero(n0);
  double total = 0.0;
  for (Index j : f.support) {
    f.omega_star(j) = gam(dir);
    total += f.omega_star(j);
  }
  f.omega_star /= total;
  f.treated_loading = f.loadings.transpose() * f.omega_star;
  return f;
}

LatentPanel draw_grid(const GridDgpConfig& cfg, const FrozenGrid& frozen, std::uint64_t seed,
                      std::uint64_t rep) {
  const Index n0 = cfg.n0;
  const Index t = cfg.t0 + cfg.t_post;
  if (frozen.loadings.rows() != n0) throw ValidationError("frozen design has the wrong donor count");
  if (!(cfg.rho_u >= 0.0 && cfg.rho_u <= 1.0)) throw ValidationError("rho_u must lie in [0, 1]");
  auto stream = [&](const char* tag) {
    return Normal(make_stream(seed, cfg.kappa, cfg.rho_u, rep, tag));
  };
  auto e_stream = [&](const std::string& tag) {
    const std::string full = cfg.residual_salt == 0 ? tag : tag + "#" + std::to_string(cfg.residual_salt);
    return Normal(make_stream(seed, cfg.kappa, cfg.rho_u, rep, full));
  };

  MatrixXd f(t, 3);
  {
    Normal u1 = stream("grid:F1");
    Normal u2 = stream("grid:F2");
    Normal u3 = stream("grid:F3");
    double f1 = 0.0, f2 = 0.0, d2 = 0.0;
    double f3 = u3(1.0 / std::sqrt(1.0 - 0.36));
    for (Index s = 0; s < t; ++s) {
      f1 += u1(2.0);
      d2 = 0.5 * d2 + u2(2.0);
      f2 += d2;
      if (s > 0) f3 = 0.6 * f3 + u3(1.0);
      f(s, 0) = f1;
      f(s, 1) = f2;
      f(s, 2) = f3;
    }
  }

  // Units: column 0 treated, 1..n0 donors.
  MatrixXd lam(n0 + 1, 3);
  lam.row(0) = frozen.treated_loading.transpose();
  lam.bottomRows(n0) = frozen.loadings;
  VectorXd alpha(n0 + 1);
  alpha(0) = 0.0;
  alpha.tail(n0) = frozen.alpha;

  MatrixXd e(t, n0 + 1);
  {
    Normal common = e_stream("grid:E_common");
    Normal idio = e_stream("grid:E_idio");
    const double sd = std::sqrt(1.0 - kPhiResidual * kPhiResidual);
    VectorXd c(t);
    for (Index s = 0; s < t; ++s) c(s) = common(sd);
    const double wc = std::sqrt(cfg.rho_u);
    const double wi = std::sqrt(1.0 - cfg.rho_u);
    for (Index j = 0; j <= n0; ++j) {
      double level = 0.0, diff = 0.0;
      for (Index s = 0; s < t; ++s) {
        diff = kPhiResidual * diff + wc * c(s) + wi * idio(sd);
        level += diff;
        e(s, j) = level;
      }
    }
  }
  MatrixXd eps(t, n0 + 1);
  {
    Normal ne = stream("grid:eps");
    for (Index j = 0; j <= n0; ++j) {
      for (Index s = 0; s < t; ++s) eps(s, j) = ne(1.0);
    }
  }
  VectorXd delta(t);
  {
    Normal nd = stream("grid:delta");
    for (Index s = 0; s < t; ++s) delta(s) = nd(1.0);
  }

  LatentPanel p;
  p.t0 = cfg.t0;
  p.systematic = f * lam.transpose();
  p.systematic.rowwise() += alpha.transpose();
  p.systematic.colwise() += delta;
  p.residual = cfg.kappa * e + eps;
  return p;
}

LatentPanel draw_simple(const SimpleDgpConfig& cfg, std::uint64_t seed, std::uint64_t rep) {
  const Index n = cfg.n0 + 1;
  const Index t = cfg.t0 + cfg.t_post;
  if (cfg.n0 < 2) throw ValidationError("simple design needs at least 2 donors");
  auto stream = [&](const char* tag) {
    return Normal(make_stream(seed, cfg.kappa, 0.0, rep, tag));
  };
  Normal nl = stream("simple:loadings");
  VectorXd lam(n);
  for (Index j = 0; j < n; ++j) lam(j) = cfg.loading_mean + nl(cfg.loading_sd);
  Normal nf = stream("simple:factor");
  VectorXd f(t);
  double level = 0.0;
  for (Index s = 0; s < t; ++s) {
    level += nf(1.0);
    f(s) = level;
  }
  Normal nr = stream("simple:rw");
  MatrixXd r(t, n);
  for (Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Index s = 0; s < t; ++s) {
      acc += nr(1.0);
      r(s, j) = acc;
    }
  }
  Normal ne = stream("simple:noise");
  MatrixXd eps(t, n);
  for (Index j = 0; j < n; ++j) {
    for (Index s = 0; s < t; ++s) eps(s, j) = ne(cfg.noise_sd);
  }
  LatentPanel p;
  p.t0 = cfg.t0;
  p.systematic = f * lam.transpose();
  p.residual = cfg.kappa * r + eps;
  return p;
}

MethodSpec parse_method_spec(const std::string& token) {
  MethodSpec m;
  m.label = token;
  if (token.rfind("hsc", 0) == 0) {
    m.method = Method::hsc;
    if (token == "hsc") {
      m.label = "hsc:q1:last_constant";
      return m;
    }
    if (token.size() < 5 || token[3] != ':') throw ValidationError("unknown method: " + token);
    m.hsc = parse_candidates(token.substr(4)).front();
    m.label = "hsc:" + candidate_token(m.hsc);
    return m;
  }
  m.method = parse_method(token);
  return m;
}

std::vector<MethodSpec> parse_method_list(const std::string& list) {
  std::vector<MethodSpec> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method_spec(item));
  }
  if (out.empty()) throw ValidationError("empty method list");
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MethodMetrics summarize(const std::string& label, const std::vector<const RepRecord*>& records) {
  MethodMetrics m;
  m.label = label;
  Index tp = 0;
  for (const RepRecord* r : records) {
    if (r->ok) {
      tp = r->errors.size();
      break;
    }
  }
  m.per_period_rmse = VectorXd::Zero(tp);
  VectorXd mean_h = VectorXd::Zero(tp);
  double sum = 0.0, sum_sq = 0.0;
  for (const RepRecord* r : records) {
    if (!r->ok) {
      ++m.failures;
      continue;
    }
    ++m.n_ok;
    sum += r->errors.sum();
    sum_sq += r->errors.squaredNorm();
    m.per_period_rmse += r->errors.cwiseAbs2();
    if (r->rho_hat >= 0.0) m.rho_hat.push_back(r->rho_hat);
  }
  if (m.n_ok > 0 && tp > 0) {
    const double count = static_cast<double>(m.n_ok) * static_cast<double>(tp);
    m.bias = sum / count;
    const double msq = sum_sq / count;
    m.rmse = std::sqrt(msq);
    m.variance = msq - m.bias * m.bias;
    m.per_period_rmse = (m.per_period_rmse / static_cast<double>(m.n_ok)).cwiseSqrt();
  } else {
    m.rmse = m.bias = m.variance = std::numeric_limits<double>::quiet_NaN();
  }
  m.median_rho_hat = m.rho_hat.empty() ? -1.0 : median(m.rho_hat);
  return m;
}

StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.methods.empty()) throw ValidationError("study needs at least one method");
  if (cfg.reps < 1) throw ValidationError("reps must be >= 1");
  FrozenGrid frozen;
  if (cfg.design == Design::grid) frozen = frozen_grid(cfg.seed, cfg.grid.n0);
  const std::size_t nm = cfg.methods.size();
  StudyResult res;
  res.records.resize(static_cast<std::size_t>(cfg.reps) * nm);

  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t rep) {
    const LatentPanel latent = cfg.design == Design::grid
                                   ? draw_grid(cfg.grid, frozen, cfg.seed, rep)
                                   : draw_simple(cfg.simple, cfg.seed, rep);
    const PrePostView view = latent.view();
    for (std::size_t mi = 0; mi < nm; ++mi) {
      RepRecord& rec = res.records[rep * nm + mi];
      rec.rep = rep;
      rec.method = mi;
      const MethodSpec& spec = cfg.methods[mi];
      try {
        VectorXd cf;
        switch (spec.method) {
          case Method::sc: cf = fit_sc(view, 0.0, cfg.qp).counterfactual; break;
          case Method::sc_int: cf = fit_sc_int(view, 0.0, false, cfg.qp).counterfactual; break;
          case Method::sc_int_trend: cf = fit_sc_int(view, 0.0, true, cfg.qp).counterfactual; break;
          case Method::diff_sc: cf = fit_diff_sc(view, 0.0, cfg.qp).counterfactual; break;
          case Method::sdid: cf = fit_sdid(view, cfg.qp).counterfactual; break;
          case Method::hsc: {
            CvPlan plan;
            plan.h = cfg.cv_h;
            plan.folds = cfg.cv_folds;
            plan.grid = cfg.cv_grid;
            plan.candidates = {spec.hsc};
            plan.qp = cfg.qp;
            const CvResult cv = cross_validate(pre_only(view), plan, cfg.zeta);
            HscConfig hc;
            hc.rho = cv.best_rho;
            hc.q = spec.hsc.q;
            hc.forecaster = spec.hsc.rule;
            hc.zeta = cfg.zeta;
            hc.qp = cfg.qp;
            cf = fit(view, hc).counterfactual;
            rec.rho_hat = cv.best_rho;
            break;
          }
        }
        rec.errors = cf - view.y_post;
        rec.ok = rec.errors.allFinite();
        if (!rec.ok) rec.error = "non-finite counterfactual";
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  });

  for (std::size_t mi = 0; mi < nm; ++mi) {
    std::vector<const RepRecord*> rs;
    for (std::uint64_t rep = 0; rep < cfg.reps; ++rep) rs.push_back(&res.records[rep * nm + mi]);
    res.metrics.push_back(summarize(cfg.methods[mi].label, rs));
  }
  return res;
}

DecompResult run_decomposition_study(const DecompConfig& cfg) {
  if (cfg.reps < 1) throw ValidationError("reps must be >= 1");
  if (cfg.grid.empty()) throw ValidationError("empty rho grid");
  for (double r : cfg.grid) check_rho(r);
  const std::size_t ng = cfg.grid.size();
  struct Slot {
    std::vector<DecompRow> rows;
    bool ok = true;
    std::string error;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(cfg.reps));
  parallel_for(slots.size(), cfg.threads, [&](std::size_t rep) {
    Slot& slot = slots[rep];
    try {
      const LatentPanel latent = draw_simple(cfg.dgp, cfg.seed, rep);
      const PrePostView view = latent.view();
      const double zeta = resolve_zeta(cfg.zeta, view.x_pre, view.t_post());
      const HscProblem problem(view.y_pre, view.x_pre, view.x_post, cfg.q, zeta);
      const VectorXd oracle = oracle_weights(latent, cfg.q, zeta, cfg.qp);
      VectorXd warm;
      for (std::size_t g = 0; g < ng; ++g) {
        const HscFit f = problem.solve(cfg.grid[g], cfg.rule, cfg.qp, g > 0 ? &warm : nullptr);
        warm = f.weights;
        const AbDecomposition ab = ab_decompose(f, latent, oracle);
        DecompRow row;
        row.rep = rep;
        row.rho = cfg.grid[g];
        row.mse = ab.prediction_error.squaredNorm() / double(ab.prediction_error.size());
        row.ch = channels(f, latent, oracle, ab);
        row.identity_gap = (ab.term_a + ab.term_b - ab.prediction_error).cwiseAbs().maxCoeff();
        row.tb_gap = (ab.term_b - ab.tb_direct).cwiseAbs().maxCoeff();
        slot.rows.push_back(row);
      }
    } catch (const std::exception& e) {
      slot.ok = false;
      slot.error = "rep " + std::to_string(rep) + ": " + e.what();
      slot.rows.clear();
    }
  });

  DecompResult res;
  std::vector<DecompSummary> acc(ng);
  std::size_t n_ok = 0;
  for (const Slot& s : slots) {
    if (!s.ok) {
      ++res.failures;
      res.failure_messages.push_back(s.error);
      continue;
    }
    ++n_ok;
    for (std::size_t g = 0; g < ng; ++g) {
      const DecompRow& r = s.rows[g];
      res.rows.push_back(r);
      DecompSummary& a = acc[g];
      a.rmse += r.mse;
      a.term_a += r.ch.term_a_norm;
      a.term_b += r.ch.term_b_norm;
      a.a1 += r.ch.a1;
      a.a2 += r.ch.a2;
      a.a3 += r.ch.a3;
      a.lambda_max_qinv += r.ch.lambda_max_qinv;
      a.transfer += r.ch.transfer;
      a.envelope += r.ch.envelope;
    }
  }
  for (std::size_t g = 0; g < ng; ++g) {
    DecompSummary a = acc[g];
    const double n = n_ok > 0 ? static_cast<double>(n_ok) : std::numeric_limits<double>::quiet_NaN();
    a.rho = cfg.grid[g];
    a.rmse = std::sqrt(a.rmse / n);
    a.term_a /= n;
    a.term_b /= n;
    a.a1 /= n;
    a.a2 /= n;
    a.a3 /= n;
    a.lambda_max_qinv /= n;
    a.transfer /= n;
    a.envelope /= n;
    res.summary.push_back(a);
  }
  return res;
}

}  // namespace hsc
