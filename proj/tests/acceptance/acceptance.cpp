// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [--only N[,N...]] [--threads N]

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "hsc/baselines.hpp"
#include "hsc/decomp.hpp"
#include "hsc/estimator.hpp"
#include "hsc/io.hpp"
#include "hsc/mc.hpp"
#include "hsc/qp.hpp"
#include "hsc/spectral.hpp"
#include "hsc/tuning.hpp"

namespace {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

int g_threads = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

hsc::PrePostView random_view(Index t0, Index tpost, Index n0, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  MatrixXd x(t0 + tpost, n0);
  for (Index j = 0; j < n0; ++j) {
    double level = 5.0 * nd(gen);
    for (Index t = 0; t < t0 + tpost; ++t) {
      level += nd(gen);
      x(t, j) = level;
    }
  }
  VectorXd w = VectorXd::Zero(n0);
  for (Index j = 0; j < 4; ++j) w(j) = ud(gen);
  w /= w.sum();
  VectorXd y = x * w;
  const double intercept = 3.0 * nd(gen);
  double ar = 0.0;
  for (Index t = 0; t < t0 + tpost; ++t) {
    ar = 0.6 * ar + 0.7 * nd(gen);
    y(t) += intercept + ar;
  }
  return {y.head(t0), x.topRows(t0), y.tail(tpost), x.bottomRows(tpost)};
}

hsc::HscConfig hsc_config(double rho, int q, double zeta) {
  hsc::HscConfig c;
  c.rho = rho;
  c.q = q;
  c.zeta = {false, zeta};
  return c;
}

double linf(const VectorXd& a, const VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// 1. Endpoint equivalences on random panels.
Outcome endpoints() {
  std::mt19937_64 gen(101);
  const Index t0 = 60, n0 = 10, tpost = 10;
  double worst_int = 0.0, worst_trend = 0.0, worst_diff = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto v = random_view(t0, tpost, n0, gen);
    const double zeta = hsc::auto_zeta(v.x_pre, tpost);
    const double ridge = zeta * zeta * static_cast<double>(t0);
    worst_int = std::max(worst_int, linf(hsc::fit(v, hsc_config(1.0, 1, zeta)).weights,
                                         hsc::fit_sc_int(v, ridge).weights));
    worst_trend = std::max(worst_trend, linf(hsc::fit(v, hsc_config(1.0, 2, zeta)).weights,
                                             hsc::fit_sc_int(v, ridge, true).weights));
    for (int q : {1, 2}) {
      const MatrixXd d = hsc::difference_operator<double>(t0, q);
      const auto oracle = hsc::solve(hsc::build_qp(d, v.y_pre, v.x_pre, ridge));
      worst_diff = std::max(worst_diff, linf(hsc::fit(v, hsc_config(0.0, q, zeta)).weights, oracle.weights));
    }
  }
  const double worst = std::max({worst_int, worst_trend, worst_diff});
  return {worst < 1e-5, "max linf: sc_int " + fmt(worst_int) + ", sc_int_trend " + fmt(worst_trend) +
                            ", differenced ridge " + fmt(worst_diff) + " (tol 1e-5)"};
}

// 2. Spectral identities.
Outcome spectral() {
  const double pi = std::acos(-1.0);
  double eig_err = 0.0, harm_err = 0.0;
  bool fixed_ok = true;
  std::vector<double> rhos = hsc::uniform_grid(21);
  for (double r : hsc::decomposition_grid()) rhos.push_back(r);
  for (double r : hsc::log_lambda_grid(21)) rhos.push_back(r);
  for (Index t0 : {10, 80, 200}) {
    const auto b = hsc::spectral_basis<double>(t0, 1);
    for (Index j = 0; j < t0; ++j) {
      const double s = std::sin(static_cast<double>(j) * pi / (2.0 * static_cast<double>(t0)));
      eig_err = std::max(eig_err, std::abs(b.mu(j) - 4.0 * s * s));
    }
    for (double rho : rhos) {
      for (Index j = 1; j < t0; ++j) {
        const double mu = b.mu(j);
        const double w = hsc::gains(mu, rho).match;
        const double expect = (1.0 - rho) / mu + rho;
        harm_err = std::max(harm_err, std::abs(1.0 / w - expect) / expect);
      }
      fixed_ok = fixed_ok && hsc::gains(1.0, rho).match == 1.0;
    }
  }
  return {eig_err < 1e-8 && harm_err < 1e-12 && fixed_ok,
          "closed-form eigenvalue err " + fmt(eig_err) + " (tol 1e-8), harmonic identity rel err " +
              fmt(harm_err) + " (tol 1e-12), w(1;rho)==1 " + (fixed_ok ? "yes" : "no")};
}

// 3. A + B identity and the direct Term-B form on the simple design.
Outcome ab_identity() {
  hsc::SimpleDgpConfig dgp;
  double id_gap = 0.0, tb_gap = 0.0;
  std::size_t fits = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    dgp.kappa = rep % 2 == 0 ? 0.0 : 2.0;
    const auto lp = hsc::draw_simple(dgp, 303, rep);
    const auto view = lp.view();
    const double zeta = hsc::auto_zeta(view.x_pre, view.t_post());
    const hsc::HscProblem problem(view.y_pre, view.x_pre, view.x_post, 1, zeta);
    const VectorXd oracle = hsc::oracle_weights(lp, 1, zeta);
    for (double rho : hsc::decomposition_grid()) {
      const auto f = problem.solve(rho, hsc::ForecastSpec{});
      const auto ab = hsc::ab_decompose(f, lp, oracle);
      id_gap = std::max(id_gap, (ab.term_a + ab.term_b - ab.prediction_error).cwiseAbs().maxCoeff());
      tb_gap = std::max(tb_gap, (ab.term_b - ab.tb_direct).cwiseAbs().maxCoeff());
      ++fits;
    }
  }
  return {id_gap < 1e-10 && tb_gap < 1e-9 && fits == 1900,
          std::to_string(fits) + " fits; max |A+B-error| " + fmt(id_gap) + " (tol 1e-10), max |TB-direct| " +
              fmt(tb_gap) + " (tol 1e-9)"};
}

// 4. Envelope dominance and the curvature bound.
Outcome envelope() {
  hsc::SimpleDgpConfig dgp;
  double worst_env = std::numeric_limits<double>::infinity();
  double worst_curv = 0.0;
  std::size_t checks = 0, violations = 0;
  for (double kappa : {0.0, 2.0}) {
    dgp.kappa = kappa;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      const auto lp = hsc::draw_simple(dgp, 404, rep);
      const auto view = lp.view();
      const double zeta = hsc::auto_zeta(view.x_pre, view.t_post());
      const hsc::HscProblem problem(view.y_pre, view.x_pre, view.x_post, 1, zeta);
      const VectorXd oracle = hsc::oracle_weights(lp, 1, zeta);
      for (double rho : hsc::decomposition_grid()) {
        const auto f = problem.solve(rho, hsc::ForecastSpec{});
        const auto ab = hsc::ab_decompose(f, lp, oracle);
        const auto ch = hsc::channels(f, lp, oracle, ab);
        // Slack covers power-iteration and QP round-off only.
        const double slack = 1e-9 * (1.0 + ch.term_a_norm);
        const double margin = ch.envelope - ch.term_a_norm;
        const double curv = ch.lambda_max_qinv * zeta * zeta;
        worst_env = std::min(worst_env, margin);
        worst_curv = std::max(worst_curv, curv);
        if (margin < -slack || curv > 1.0 + 1e-12) ++violations;
        ++checks;
      }
    }
  }
  return {violations == 0 && checks == 2 * 50 * 19,
          std::to_string(checks) + " checks, " + std::to_string(violations) +
              " violations; min(envelope - |A|) " + fmt(worst_env) + ", max zeta^2 lambda_max(Q^-1) " +
              fmt(worst_curv)};
}

hsc::StudyConfig base_study() {
  hsc::StudyConfig cfg;
  cfg.threads = g_threads;
  cfg.cv_folds = 10;
  cfg.cv_grid = hsc::uniform_grid(21);
  return cfg;
}

double median_rho(const hsc::StudyResult& r, std::size_t method) {
  return r.metrics.at(method).median_rho_hat;
}

// 5. Regime adaptation on the illustration design.
Outcome regime() {
  auto cfg = base_study();
  cfg.design = hsc::Design::simple;
  cfg.simple.loading_mean = 1.0;
  cfg.simple.loading_sd = 1.0;
  cfg.simple.noise_sd = 2.0;
  cfg.simple.n0 = 10;
  cfg.simple.t0 = 80;
  cfg.simple.t_post = 20;
  cfg.methods = hsc::parse_method_list("hsc:q1:last_constant");
  cfg.cv_h = 1;
  cfg.reps = 50;
  cfg.seed = 505;
  cfg.simple.kappa = 0.0;
  const auto r0 = hsc::run_study(cfg);
  cfg.simple.kappa = 2.0;
  const auto r2 = hsc::run_study(cfg);
  const double m0 = median_rho(r0, 0), m2 = median_rho(r2, 0);
  const std::size_t fails = r0.metrics[0].failures + r2.metrics[0].failures;
  return {m0 >= 0.9 && m2 <= 0.2 && fails == 0,
          "median rho_hat kappa=0: " + fmt(m0) + " (need >= 0.9), kappa=2: " + fmt(m2) +
              " (need <= 0.2), failed reps " + std::to_string(fails)};
}

// 6. Monte Carlo ordering on the grid design.
Outcome mc_ordering() {
  auto cfg = base_study();
  cfg.design = hsc::Design::grid;
  cfg.grid.t0 = 200;
  cfg.grid.n0 = 50;
  cfg.grid.t_post = 20;
  cfg.grid.rho_u = 0.0;
  cfg.methods = hsc::parse_method_list("sc,sc_int,hsc:q1:last_constant");
  cfg.reps = 100;
  cfg.seed = 606;
  cfg.grid.kappa = 2.0;
  const auto a = hsc::run_study(cfg);
  cfg.grid.kappa = 0.0;
  const auto b = hsc::run_study(cfg);
  const double sc2 = a.metrics[0].rmse, int2 = a.metrics[1].rmse, hsc2 = a.metrics[2].rmse;
  const double int0 = b.metrics[1].rmse, hsc0 = b.metrics[2].rmse;
  std::size_t fails = 0;
  for (const auto* r : {&a, &b})
    for (const auto& m : r->metrics) fails += m.failures;
  const bool ok = hsc2 < int2 && hsc2 < sc2 && hsc0 <= 1.1 * int0 && fails == 0;
  return {ok, "kappa=2: rmse hsc " + fmt(hsc2) + ", sc_int " + fmt(int2) + ", sc " + fmt(sc2) +
                  "; kappa=0: hsc/sc_int " + fmt(hsc0 / int0) + " (need <= 1.1); failed reps " +
                  std::to_string(fails)};
}

// 7. Longer CV horizons favour larger rho.
Outcome horizon_shift() {
  auto cfg = base_study();
  cfg.design = hsc::Design::grid;
  cfg.grid.kappa = 2.0;
  cfg.grid.rho_u = 0.5;
  cfg.methods = hsc::parse_method_list("hsc:q1:last_constant");
  cfg.reps = 50;
  cfg.seed = 707;
  cfg.cv_h = 1;
  const auto h1 = hsc::run_study(cfg);
  cfg.cv_h = 20;
  const auto h20 = hsc::run_study(cfg);
  const double m1 = median_rho(h1, 0), m20 = median_rho(h20, 0);
  const std::size_t fails = h1.metrics[0].failures + h20.metrics[0].failures;
  return {m20 > m1 && fails == 0, "median rho_hat h=1: " + fmt(m1) + ", h=20: " + fmt(m20) +
                                      "; failed reps " + std::to_string(fails)};
}

std::string long_csv(const MatrixXd& outcomes) {
  std::ostringstream out;
  out << "unit,time,outcome\n";
  for (Index j = 0; j < outcomes.cols(); ++j) {
    for (Index t = 0; t < outcomes.rows(); ++t) {
      out << (j == 0 ? std::string("treated") : "donor" + std::to_string(j)) << "," << t + 1 << ",";
      out << hsc::format_number(outcomes(t, j)) << "\n";
    }
  }
  return out.str();
}

bool same_files(const std::string& a, const std::string& b, const std::vector<std::string>& names,
                std::string& diff) {
  for (const auto& n : names) {
    if (hsc::read_file(a + "/" + n) != hsc::read_file(b + "/" + n)) {
      diff = n;
      return false;
    }
  }
  return true;
}

// 8. Leakage and determinism.
Outcome leakage_determinism() {
  const fs::path root = fs::temp_directory_path() / "hsc_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  std::mt19937_64 gen(808);
  std::normal_distribution<double> nd;
  bool lib_ok = true, cli_ok = true, sim_ok = true;
  std::string note;

  for (int rep = 0; rep < 5 && lib_ok; ++rep) {
    hsc::SimpleDgpConfig dgp;
    dgp.kappa = rep % 2 == 0 ? 2.0 : 0.0;
    dgp.t_post = 8;
    const auto lp = hsc::draw_simple(dgp, 808, static_cast<std::uint64_t>(rep));
    hsc::Panel clean = hsc::make_panel(lp.outcomes().col(0), lp.outcomes().rightCols(dgp.n0), dgp.t0);
    hsc::Panel dirty = clean;
    for (Index t = dgp.t0; t < dirty.periods(); ++t)
      for (Index j = 0; j < dirty.outcomes.cols(); ++j) dirty.outcomes(t, j) = 1e8 * nd(gen);
    hsc::CvPlan plan;
    plan.candidates = hsc::parse_candidates("q1:last_constant,q2:arima110,q1:linear");
    const auto a = hsc::cross_validate(hsc::pre_only(clean), plan, {true, 0.0});
    const auto b = hsc::cross_validate(hsc::pre_only(dirty), plan, {true, 0.0});
    lib_ok = a.cv.cwiseEqual(b.cv).all() && a.best_rho == b.best_rho && a.best_candidate == b.best_candidate;
  }

  {
    hsc::SimpleDgpConfig dgp;
    dgp.kappa = 2.0;
    dgp.t_post = 6;
    const auto lp = hsc::draw_simple(dgp, 809, 0);
    MatrixXd y = lp.outcomes();
    MatrixXd z = y;
    for (Index t = dgp.t0; t < z.rows(); ++t)
      for (Index j = 0; j < z.cols(); ++j) z(t, j) = -3e5 + 1e4 * nd(gen);
    hsc::write_file((root / "clean.csv").string(), long_csv(y));
    hsc::write_file((root / "dirty.csv").string(), long_csv(z));
    const std::string t0 = std::to_string(dgp.t0);
    for (const char* which : {"clean", "dirty"}) {
      std::ostringstream out, err;
      const int code = hsc::cli::run({"cv", "--panel", (root / (std::string(which) + ".csv")).string(), "--treated",
                                      "treated", "--t0", t0, "--candidates", "q1:last_constant,q2:linear",
                                      "--out", (root / (std::string("cv_") + which)).string()},
                                     out, err);
      if (code != 0) {
        cli_ok = false;
        note += std::string(" cv exit ") + std::to_string(code) + ": " + err.str();
      }
    }
    std::string diff;
    if (cli_ok && !same_files((root / "cv_clean").string(), (root / "cv_dirty").string(),
                              {"cv.csv", "selection.json"}, diff)) {
      cli_ok = false;
      note += " cv output differs in " + diff;
    }
  }

  {
    std::vector<std::string> names;
    for (int threads : {1, 2, 5}) {
      std::ostringstream out, err;
      const std::string dir = (root / ("sim" + std::to_string(threads))).string();
      const int code = hsc::cli::run({"simulate", "--design", "grid", "--kappa", "1", "--rho-u", "0.5", "--reps", "6",
                                      "--pre-periods", "60", "--post-periods", "5", "--n-donors", "12",
                                      "--folds", "5", "--methods", "sc,sc_int,diff_sc,sdid,hsc,hsc:q2:arima110",
                                      "--seed", "88", "--threads", std::to_string(threads), "--out", dir},
                                     out, err);
      if (code != 0) {
        sim_ok = false;
        note += " simulate exit " + std::to_string(code) + ": " + err.str();
        break;
      }
      if (names.empty())
        for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    }
    std::string diff;
    if (sim_ok && (names.empty() || !same_files((root / "sim1").string(), (root / "sim2").string(), names, diff) ||
                   !same_files((root / "sim1").string(), (root / "sim5").string(), names, diff))) {
      sim_ok = false;
      note += " simulate output differs in " + diff;
    }
    if (sim_ok) note += " " + std::to_string(names.size()) + " simulate files identical for threads 1/2/5";
  }
  fs::remove_all(root);
  return {lib_ok && cli_ok && sim_ok, std::string("library cv invariant ") + (lib_ok ? "yes" : "no") +
                                          ", cli cv invariant " + (cli_ok ? "yes" : "no") + ";" + note};
}

// Zoomed dense grid over the simplex for two or three donors.
VectorXd grid_search(const hsc::SimplexQP<double>& qp) {
  const Index n = qp.dim();
  const int m = n == 2 ? 2000 : 400;
  double step = 1.0 / m;
  double lo_a = 0.0, hi_a = 1.0, lo_b = 0.0, hi_b = n == 3 ? 1.0 : 0.0;
  VectorXd best(n);
  double best_val = std::numeric_limits<double>::infinity();
  auto point = [&](double a, double b) {
    VectorXd w(n);
    if (n == 2) {
      w << a, 1.0 - a;
    } else {
      w << a, b, 1.0 - a - b;
    }
    return w;
  };
  for (int round = 0; round < 40; ++round) {
    for (double a = lo_a; a <= hi_a + 1e-15; a += step) {
      for (double b = lo_b; b <= hi_b + 1e-15; b += step) {
        const double aa = std::min(a, 1.0), bb = std::min(b, 1.0 - aa);
        if (n == 3 && a + b > 1.0 + 1e-15) break;
        const VectorXd w = point(aa, n == 3 ? bb : 0.0);
        const double v = qp.objective(w);
        if (v < best_val) {
          best_val = v;
          best = w;
        }
      }
    }
    lo_a = std::max(0.0, best(0) - 2.0 * step);
    hi_a = std::min(1.0, best(0) + 2.0 * step);
    if (n == 3) {
      lo_b = std::max(0.0, best(1) - 2.0 * step);
      hi_b = std::min(1.0, best(1) + 2.0 * step);
    }
    step /= 4.0;
    if (step < 1e-13) break;
  }
  return best;
}

// 9. QP solver against grid search.
Outcome qp_oracle() {
  std::mt19937_64 gen(909);
  std::normal_distribution<double> nd;
  double worst_w = 0.0, worst_obj = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const Index n = inst % 2 == 0 ? 2 : 3;
    const Index t = 12 + inst % 9;
    const MatrixXd x = MatrixXd::NullaryExpr(t, n, [&]() { return nd(gen); });
    const VectorXd y = VectorXd::NullaryExpr(t, [&]() { return nd(gen); });
    const double ridge = inst % 4 < 2 ? 0.0 : 0.1;
    const auto qp = hsc::build_qp(MatrixXd::Identity(t, t), y, x, ridge);
    const auto sol = hsc::solve(qp);
    const VectorXd g = grid_search(qp);
    worst_w = std::max(worst_w, linf(sol.weights, g));
    worst_obj = std::max(worst_obj, std::abs(qp.objective(sol.weights) - qp.objective(g)));
  }
  return {worst_w < 2e-4 && worst_obj < 1e-8,
          "200 instances; max weight diff " + fmt(worst_w) + " (tol 2e-4), max objective diff " + fmt(worst_obj) +
              " (tol 1e-8)"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (a == "--threads" && i + 1 < argc) {
      g_threads = std::max(1, std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--only N[,N...]] [--threads N]\n";
      return 1;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "endpoint equivalences", 30, endpoints},
      {2, "spectral identities", 5, spectral},
      {3, "A+B identity and direct Term B", 120, ab_identity},
      {4, "envelope dominance and curvature bound", 300, envelope},
      {5, "regime adaptation of rho_hat", 300, regime},
      {6, "Monte Carlo RMSE ordering", 900, mc_ordering},
      {7, "CV horizon shift", 1200, horizon_shift},
      {8, "leakage and determinism", 120, leakage_determinism},
      {9, "QP vs dense simplex grid", 60, qp_oracle},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s [%d] %s: %s; %.1fs (budget %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
