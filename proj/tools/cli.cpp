#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hsc/baselines.hpp"
#include "hsc/errors.hpp"
#include "hsc/estimator.hpp"
#include "hsc/io.hpp"
#include "hsc/mc.hpp"
#include "hsc/panel.hpp"
#include "hsc/tuning.hpp"

namespace hsc::cli {

using json = nlohmann::ordered_json;
using Eigen::Index;
using Eigen::VectorXd;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

namespace {

struct Options {
  std::string out;
  std::string config;
  std::uint64_t seed = 1;
  int threads = 1;

  std::string panel;
  std::string treated;
  long t0 = -1;
  std::string treat_time;

  std::string method = "hsc";
  std::string rho = "1";
  int q = 1;
  std::string forecaster = "last_constant";
  std::string zeta = "auto";
  double ridge = 0.0;

  long h = 1;
  long folds = 10;
  long first_origin = -1;
  std::string grid = "uniform21";
  std::string candidates;

  std::string design = "grid";
  double kappa = 0.0;
  double rho_u = 0.0;
  long reps = -1;
  std::string methods = "hsc,sc,sc_int,diff_sc";
  long n_donors = -1;
  long pre_periods = -1;
  long post_periods = -1;
};

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Turns a flat JSON object into command-line tokens placed before the user's
// own flags, so flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ValidationError("config must be a JSON object");
  auto given = [&](const std::string& flag) {
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> tokens;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    std::string key = it.key();
    for (char& ch : key) {
      if (ch == '_') ch = '-';
    }
    if (key == "config") continue;
    const json& v = it.value();
    const std::string flag = "--" + key;
    // A command-line flag also displaces the config value of its exclusive partner.
    if (key == "t0" && given("--treat-time")) continue;
    if (key == "treat-time" && given("--t0")) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) tokens.push_back(flag);
    } else if (v.is_number_integer()) {
      tokens.push_back(flag);
      tokens.push_back(std::to_string(v.get<long long>()));
    } else if (v.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(format_number(v.get<double>()));
    } else if (v.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(v.get<std::string>());
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) {
        if (!joined.empty()) joined += ",";
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else {
      throw ValidationError("config key " + it.key() + " has an unsupported value");
    }
  }
  std::vector<std::string> out;
  out.push_back(args.front());
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

void write_manifest(const std::string& dir, const std::string& command, const json& config,
                    std::uint64_t seed, const std::string& digest) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["tool_version"] = kToolVersion;
  if (digest.empty()) {
    m["input_digest"] = nullptr;
  } else {
    m["input_digest"] = "sha256:" + digest;
  }
  write_file(dir + "/manifest.json", m.dump(2) + "\n");
}

struct LoadedPanel {
  Panel panel;
  std::string digest;
};

LoadedPanel load(const Options& o) {
  if (o.panel.empty()) throw ValidationError("--panel is required");
  if (o.treated.empty()) throw ValidationError("--treated is required");
  const std::string bytes = read_file(o.panel);
  std::istringstream in(bytes);
  const LongTable table = read_long_csv(in);
  Index t0 = o.t0;
  if (!o.treat_time.empty()) {
    t0 = t0_from_treat_time(table, o.treat_time);
  } else if (o.t0 < 0) {
    throw ValidationError("one of --t0 or --treat-time is required");
  }
  return {select_panel(table, o.treated, t0), sha256_hex(bytes)};
}

json panel_config(const Options& o, const Panel& p) {
  json c;
  c["panel"] = o.panel;
  c["treated"] = o.treated;
  c["t0"] = p.t0;
  return c;
}

CvPlan make_plan(const Options& o, const std::vector<Candidate>& cands) {
  CvPlan plan;
  plan.h = o.h;
  plan.folds = o.folds;
  if (o.first_origin >= 0) plan.first_origin = o.first_origin;
  plan.grid = parse_grid(o.grid);
  plan.candidates = cands;
  plan.threads = o.threads;
  return plan;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ValidationError("--out is required");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir);
}

int cmd_estimate(const Options& o, std::ostream& out) {
  const LoadedPanel lp = load(o);
  const Panel& p = lp.panel;
  const PrePostView view = split(p);
  ensure_dir(o.out);
  json cfg = panel_config(o, p);
  cfg["method"] = o.method;

  const Method method = parse_method(o.method);
  VectorXd weights, cf, donor, forecast;
  json extra;
  std::vector<std::string> warnings;
  VectorXd r_pre, e_pre, u_pre;

  if (method == Method::hsc) {
    HscConfig hc;
    hc.q = o.q;
    hc.forecaster = parse_forecaster(o.forecaster);
    hc.zeta = parse_zeta(o.zeta);
    if (o.rho == "cv") {
      const std::vector<Candidate> cands =
          o.candidates.empty() ? std::vector<Candidate>{Candidate{o.q, hc.forecaster}}
                               : parse_candidates(o.candidates);
      const CvResult cv = cross_validate(pre_only(view), make_plan(o, cands), hc.zeta);
      hc.rho = cv.best_rho;
      hc.q = cv.candidates[cv.best_candidate].q;
      hc.forecaster = cv.candidates[cv.best_candidate].rule;
      extra["cv_mspe"] = cv.best_cv;
      cfg["h"] = o.h;
      cfg["folds"] = static_cast<long>(cv.origins.size());
      cfg["grid"] = o.grid;
      json cj = json::array();
      for (const auto& c : cands) cj.push_back(candidate_token(c));
      cfg["candidates"] = cj;
    } else {
      std::size_t used = 0;
      double rho = 0.0;
      try {
        rho = std::stod(o.rho, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != o.rho.size() || o.rho.empty()) {
        throw ValidationError("--rho must be a number in [0, 1] or 'cv'");
      }
      check_rho(rho);
      hc.rho = rho;
    }
    cfg["rho"] = o.rho;
    cfg["q"] = o.q;
    cfg["forecaster"] = o.forecaster;
    cfg["zeta"] = o.zeta;
    const HscFit f = fit(view, hc);
    weights = f.weights;
    cf = f.counterfactual;
    donor = f.donor_component;
    forecast = f.forecast_component;
    r_pre = f.r_pre;
    e_pre = f.e_pre;
    u_pre = f.u_pre;
    warnings = f.warnings;
    extra["rho"] = f.rho;
    extra["q"] = f.q;
    extra["forecaster"] = forecaster_token(hc.forecaster);
    extra["zeta"] = f.zeta;
    extra["kkt_residual"] = f.kkt_residual;
  } else {
    BaselineFit b;
    switch (method) {
      case Method::sc: b = fit_sc(view, o.ridge); break;
      case Method::sc_int: b = fit_sc_int(view, o.ridge, false); break;
      case Method::sc_int_trend: b = fit_sc_int(view, o.ridge, true); break;
      case Method::diff_sc: b = fit_diff_sc(view, o.ridge); break;
      case Method::sdid: b = fit_sdid(view); break;
      case Method::hsc: break;
    }
    if (method != Method::sdid) cfg["ridge"] = o.ridge;
    weights = b.weights;
    cf = b.counterfactual;
    donor = view.x_post * weights;
    forecast = cf - donor;
    r_pre = view.y_pre - view.x_pre * weights;
    extra["intercept"] = b.intercept;
    if (method == Method::sc_int_trend) extra["slope"] = b.slope;
    if (method == Method::sdid) {
      extra["zeta"] = b.zeta;
      extra["time_weights"] = vec_json(b.time_weights);
      extra["time_weights_converged"] = b.time_weights_converged;
    }
    extra["kkt_residual"] = b.kkt_residual;
  }

  std::string csv = csv_line({"time", "observed", "counterfactual", "donor_component",
                              "forecast_component", "effect"});
  for (Index s = 0; s < view.t_post(); ++s) {
    csv += csv_line({p.time_labels[static_cast<std::size_t>(p.t0 + s)],
                     format_number(view.y_post(s)), format_number(cf(s)), format_number(donor(s)),
                     format_number(forecast(s)), format_number(view.y_post(s) - cf(s))});
  }
  write_file(o.out + "/counterfactual.csv", csv);

  std::string comp = csv_line({"time", "observed", "donor_fit", "residual", "smoothed", "rough"});
  for (Index t = 0; t < view.t0(); ++t) {
    comp += csv_line({p.time_labels[static_cast<std::size_t>(t)], format_number(view.y_pre(t)),
                      format_number(view.y_pre(t) - r_pre(t)), format_number(r_pre(t)),
                      e_pre.size() ? format_number(e_pre(t)) : "",
                      u_pre.size() ? format_number(u_pre(t)) : ""});
  }
  write_file(o.out + "/components.csv", comp);

  json w;
  w["method"] = o.method;
  json wm;
  for (Index j = 0; j < weights.size(); ++j) {
    wm[p.unit_labels[static_cast<std::size_t>(j + 1)]] = weights(j);
  }
  w["weights"] = wm;
  for (auto it = extra.begin(); it != extra.end(); ++it) w[it.key()] = it.value();
  if (e_pre.size()) w["e_pre"] = vec_json(e_pre);
  w["counterfactual"] = vec_json(cf);
  json comps;
  comps["donor"] = vec_json(donor);
  comps["forecast"] = vec_json(forecast);
  w["components"] = comps;
  json wj = json::array();
  for (const auto& s : warnings) wj.push_back(s);
  w["warnings"] = wj;
  write_file(o.out + "/weights.json", w.dump(2) + "\n");

  write_manifest(o.out, "estimate", cfg, o.seed, lp.digest);
  for (const auto& s : warnings) out << "warning: " << s << "\n";
  out << "estimate: " << o.method << " written to " << o.out << "\n";
  return 0;
}

int cmd_cv(const Options& o, std::ostream& out) {
  const LoadedPanel lp = load(o);
  const Panel& p = lp.panel;
  ensure_dir(o.out);
  const std::vector<Candidate> cands =
      o.candidates.empty()
          ? std::vector<Candidate>{Candidate{o.q, parse_forecaster(o.forecaster)}}
          : parse_candidates(o.candidates);
  const ZetaSpec zeta = parse_zeta(o.zeta);
  const CvResult cv = cross_validate(pre_only(p), make_plan(o, cands), zeta);

  std::string csv = csv_line({"rho", "q", "forecaster", "cv_mspe"});
  for (std::size_t c = 0; c < cv.candidates.size(); ++c) {
    for (std::size_t g = 0; g < cv.grid.size(); ++g) {
      csv += csv_line({format_number(cv.grid[g]), std::to_string(cv.candidates[c].q),
                       forecaster_token(cv.candidates[c].rule),
                       format_number(cv.cv(static_cast<Index>(g), static_cast<Index>(c)))});
    }
  }
  write_file(o.out + "/cv.csv", csv);

  json sel;
  sel["rho"] = cv.best_rho;
  sel["q"] = cv.candidates[cv.best_candidate].q;
  sel["forecaster"] = forecaster_token(cv.candidates[cv.best_candidate].rule);
  sel["cv_mspe"] = cv.best_cv;
  json origins = json::array();
  for (Index k : cv.origins) origins.push_back(k);
  sel["origins"] = origins;
  json invalid = json::array();
  for (std::size_t c = 0; c < cv.candidates.size(); ++c) {
    if (!cv.valid[c]) {
      json e;
      e["candidate"] = candidate_token(cv.candidates[c]);
      e["reason"] = cv.invalid_reason[c];
      invalid.push_back(e);
    }
  }
  sel["invalid"] = invalid;
  write_file(o.out + "/selection.json", sel.dump(2) + "\n");

  json cfg = panel_config(o, p);
  cfg["h"] = o.h;
  cfg["folds"] = static_cast<long>(cv.origins.size());
  cfg["grid"] = o.grid;
  json cj = json::array();
  for (const auto& c : cands) cj.push_back(candidate_token(c));
  cfg["candidates"] = cj;
  cfg["zeta"] = o.zeta;
  write_manifest(o.out, "cv", cfg, o.seed, lp.digest);
  out << "cv: rho=" << format_number(cv.best_rho) << " candidate="
      << candidate_token(cv.candidates[cv.best_candidate]) << "\n";
  return 0;
}

void apply_sizes(const Options& o, Index& t0, Index& tp, Index& n0) {
  if (o.pre_periods > 0) t0 = o.pre_periods;
  if (o.post_periods > 0) tp = o.post_periods;
  if (o.n_donors > 0) n0 = o.n_donors;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  ensure_dir(o.out);
  StudyConfig sc;
  sc.design = parse_design(o.design);
  sc.grid.kappa = o.kappa;
  sc.grid.rho_u = o.rho_u;
  sc.simple.kappa = o.kappa;
  if (sc.design == Design::grid) {
    apply_sizes(o, sc.grid.t0, sc.grid.t_post, sc.grid.n0);
  } else {
    apply_sizes(o, sc.simple.t0, sc.simple.t_post, sc.simple.n0);
  }
  if (o.reps == 0 || o.reps < -1) throw ValidationError("--reps must be >= 1");
  sc.reps = o.reps > 0 ? static_cast<std::uint64_t>(o.reps) : (sc.design == Design::grid ? 100 : 50);
  sc.seed = o.seed;
  sc.threads = o.threads;
  sc.methods = parse_method_list(o.methods);
  sc.cv_h = o.h;
  sc.cv_folds = o.folds;
  sc.cv_grid = parse_grid(o.grid);
  sc.zeta = parse_zeta(o.zeta);
  const StudyResult res = run_study(sc);

  std::string csv = csv_line({"rep", "method", "horizon", "error", "rho_hat", "status"});
  for (const RepRecord& r : res.records) {
    const std::string& label = sc.methods[r.method].label;
    const std::string rho = r.rho_hat >= 0.0 ? format_number(r.rho_hat) : "";
    if (!r.ok) {
      csv += csv_line({std::to_string(r.rep), label, "", "NaN", rho, "failed: " + one_line(r.error)});
      continue;
    }
    for (Index s = 0; s < r.errors.size(); ++s) {
      csv += csv_line({std::to_string(r.rep), label, std::to_string(s + 1),
                       format_number(r.errors(s)), rho, "ok"});
    }
  }
  write_file(o.out + "/errors.csv", csv);

  json summary;
  summary["design"] = design_name(sc.design);
  summary["kappa"] = o.kappa;
  summary["rho_u"] = o.rho_u;
  summary["reps"] = sc.reps;
  json ms = json::array();
  for (const MethodMetrics& m : res.metrics) {
    json e;
    e["method"] = m.label;
    e["rmse"] = m.rmse;
    e["bias"] = m.bias;
    e["variance"] = m.variance;
    e["per_period_rmse"] = vec_json(m.per_period_rmse);
    e["n_ok"] = m.n_ok;
    e["failures"] = m.failures;
    if (!m.rho_hat.empty()) {
      e["median_rho_hat"] = m.median_rho_hat;
      json rh = json::array();
      for (double v : m.rho_hat) rh.push_back(v);
      e["rho_hat"] = rh;
    }
    ms.push_back(e);
  }
  summary["methods"] = ms;
  write_file(o.out + "/summary.json", summary.dump(2) + "\n");

  json cfg;
  cfg["design"] = o.design;
  cfg["kappa"] = o.kappa;
  cfg["rho_u"] = o.rho_u;
  cfg["reps"] = sc.reps;
  cfg["methods"] = o.methods;
  cfg["h"] = o.h;
  cfg["folds"] = o.folds;
  cfg["grid"] = o.grid;
  cfg["zeta"] = o.zeta;
  if (sc.design == Design::grid) {
    cfg["pre_periods"] = sc.grid.t0;
    cfg["post_periods"] = sc.grid.t_post;
    cfg["n_donors"] = sc.grid.n0;
  } else {
    cfg["pre_periods"] = sc.simple.t0;
    cfg["post_periods"] = sc.simple.t_post;
    cfg["n_donors"] = sc.simple.n0;
  }
  write_manifest(o.out, "simulate", cfg, o.seed, "");
  for (const MethodMetrics& m : res.metrics) {
    out << m.label << ": rmse=" << format_number(m.rmse) << " failures=" << m.failures << "\n";
  }
  return 0;
}

int cmd_decompose(const Options& o, std::ostream& out) {
  if (parse_design(o.design) != Design::simple) {
    throw ValidationError("decompose requires --design simple");
  }
  ensure_dir(o.out);
  DecompConfig dc;
  dc.dgp.kappa = o.kappa;
  apply_sizes(o, dc.dgp.t0, dc.dgp.t_post, dc.dgp.n0);
  if (o.reps == 0 || o.reps < -1) throw ValidationError("--reps must be >= 1");
  dc.reps = o.reps > 0 ? static_cast<std::uint64_t>(o.reps) : 50;
  dc.seed = o.seed;
  dc.threads = o.threads;
  dc.q = o.q;
  dc.rule = parse_forecaster(o.forecaster);
  dc.zeta = parse_zeta(o.zeta);
  const DecompResult res = run_decomposition_study(dc);

  std::string csv = csv_line({"rho", "rmse", "term_a", "term_b", "a1", "a2", "a3",
                              "lambda_max_qinv", "transfer", "envelope"});
  for (const DecompSummary& s : res.summary) {
    csv += csv_line({format_number(s.rho), format_number(s.rmse), format_number(s.term_a),
                     format_number(s.term_b), format_number(s.a1), format_number(s.a2),
                     format_number(s.a3), format_number(s.lambda_max_qinv),
                     format_number(s.transfer), format_number(s.envelope)});
  }
  write_file(o.out + "/decomposition.csv", csv);

  std::string reps = csv_line({"rep", "rho", "mse", "term_a", "term_b", "a1", "a2", "a3",
                               "lambda_max_qinv", "transfer", "envelope", "identity_gap",
                               "tb_gap", "pseudo_inverse"});
  for (const DecompRow& r : res.rows) {
    reps += csv_line({std::to_string(r.rep), format_number(r.rho), format_number(r.mse),
                      format_number(r.ch.term_a_norm), format_number(r.ch.term_b_norm),
                      format_number(r.ch.a1), format_number(r.ch.a2), format_number(r.ch.a3),
                      format_number(r.ch.lambda_max_qinv), format_number(r.ch.transfer),
                      format_number(r.ch.envelope), format_number(r.identity_gap),
                      format_number(r.tb_gap), r.ch.pseudo_inverse ? "1" : "0"});
  }
  write_file(o.out + "/decomposition_reps.csv", reps);

  json cfg;
  cfg["design"] = o.design;
  cfg["kappa"] = o.kappa;
  cfg["reps"] = dc.reps;
  cfg["q"] = o.q;
  cfg["forecaster"] = o.forecaster;
  cfg["zeta"] = o.zeta;
  cfg["pre_periods"] = dc.dgp.t0;
  cfg["post_periods"] = dc.dgp.t_post;
  cfg["n_donors"] = dc.dgp.n0;
  cfg["failures"] = res.failures;
  write_manifest(o.out, "decompose", cfg, o.seed, "");
  out << "decompose: " << res.summary.size() << " rho values, " << res.failures
      << " failed replications\n";
  return res.failures == dc.reps ? 2 : 0;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Harmonic synthetic control toolkit"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  // -h would collide with the --h horizon flag.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(kToolVersion));

  auto common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "Output directory")->required();
    s->add_option("--config", o.config, "JSON file of flag defaults");
    s->add_option("--seed", o.seed, "Master seed");
    s->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto panel_opts = [&](CLI::App* s) {
    s->add_option("--panel", o.panel, "Long CSV with columns unit,time,outcome")->required();
    s->add_option("--treated", o.treated, "Label of the treated unit")->required();
    auto* t0 = s->add_option("--t0", o.t0, "Number of pre-treatment periods");
    auto* tt = s->add_option("--treat-time", o.treat_time, "Label of the first treated period");
    t0->excludes(tt);
    tt->excludes(t0);
  };
  auto hsc_opts = [&](CLI::App* s) {
    s->add_option("--q", o.q, "Penalty order (1 or 2)")->check(CLI::IsMember({1, 2}));
    s->add_option("--forecaster", o.forecaster, "last_constant|linear|arima110|ar|hamilton");
    s->add_option("--zeta", o.zeta, "auto or a non-negative number");
  };
  auto cv_opts = [&](CLI::App* s) {
    s->add_option("--h", o.h, "CV horizon");
    s->add_option("--folds", o.folds, "Number of rolling origins (L)");
    s->add_option("--first-origin", o.first_origin, "First training length (overrides --folds)");
    s->add_option("--grid", o.grid, "uniform21|loglambda");
    s->add_option("--candidates", o.candidates, "q1:last_constant,q2:arima110,...");
  };
  auto dgp_opts = [&](CLI::App* s) {
    s->add_option("--design", o.design, "grid|simple");
    s->add_option("--kappa", o.kappa, "Residual scale");
    s->add_option("--reps", o.reps, "Replications");
    s->add_option("--n-donors", o.n_donors, "Override donor count");
    s->add_option("--pre-periods", o.pre_periods, "Override T0");
    s->add_option("--post-periods", o.post_periods, "Override Tpost");
  };

  CLI::App* est = app.add_subcommand("estimate", "Fit one estimator on a panel");
  common(est);
  panel_opts(est);
  hsc_opts(est);
  cv_opts(est);
  est->add_option("--method", o.method, "sc|sc_int|sc_int_trend|diff_sc|sdid|hsc");
  est->add_option("--rho", o.rho, "Number in [0,1] or 'cv'");
  est->add_option("--ridge", o.ridge, "Ridge penalty for sc, sc_int, diff_sc");

  CLI::App* cvc = app.add_subcommand("cv", "Rolling-origin selection of rho");
  common(cvc);
  panel_opts(cvc);
  hsc_opts(cvc);
  cv_opts(cvc);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
  common(sim);
  dgp_opts(sim);
  cv_opts(sim);
  sim->add_option("--zeta", o.zeta, "auto or a non-negative number");
  sim->add_option("--rho-u", o.rho_u, "Common share of residual innovations");
  sim->add_option("--methods", o.methods, "Comma-separated method list");

  CLI::App* dec = app.add_subcommand("decompose", "Term A / Term B decomposition study");
  common(dec);
  dgp_opts(dec);
  hsc_opts(dec);
  o.design = "grid";

  try {
    if (raw_args.empty()) {
      out << app.help();
      return 1;
    }
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (est->parsed()) return cmd_estimate(o, out);
    if (cvc->parsed()) return cmd_cv(o, out);
    if (sim->parsed()) return cmd_simulate(o, out);
    if (dec->parsed()) {
      if (dec->count("--design") == 0) o.design = "simple";
      return cmd_decompose(o, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: numerical: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 1;
}

}  // namespace hsc::cli
