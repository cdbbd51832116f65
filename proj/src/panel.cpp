#include "hsc/panel.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "hsc/errors.hpp"

namespace hsc {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) {
    --e;
  }
  std::string out = s.substr(b, e - b);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cur.push_back(ch);
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

LongTable read_long_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("panel csv: empty input");
  const auto header = split_fields(line);
  int iu = -1, it = -1, io = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "unit") iu = static_cast<int>(k);
    if (header[k] == "time") it = static_cast<int>(k);
    if (header[k] == "outcome") io = static_cast<int>(k);
  }
  if (iu < 0 || it < 0 || io < 0) {
    throw ValidationError("panel csv: header must name columns unit,time,outcome");
  }
  const std::size_t width = header.size();

  std::vector<std::string> units;
  std::map<std::string, std::size_t> unit_index;
  std::vector<std::vector<std::string>> unit_times;
  std::vector<std::map<std::string, double>> unit_values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != width) {
      throw ValidationError("panel csv: line " + std::to_string(lineno) + " has " +
                            std::to_string(f.size()) + " fields, expected " +
                            std::to_string(width));
    }
    const std::string& u = f[static_cast<std::size_t>(iu)];
    const std::string& t = f[static_cast<std::size_t>(it)];
    const std::string& v = f[static_cast<std::size_t>(io)];
    if (u.empty() || t.empty()) {
      throw ValidationError("panel csv: empty unit or time at line " + std::to_string(lineno));
    }
    double value = 0.0;
    std::size_t used = 0;
    try {
      value = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (v.empty() || used != v.size() || !std::isfinite(value)) {
      throw ValidationError("panel csv: missing or non-numeric outcome for (unit=" + u +
                            ", time=" + t + ")");
    }
    auto found = unit_index.find(u);
    std::size_t ui;
    if (found == unit_index.end()) {
      ui = units.size();
      unit_index.emplace(u, ui);
      units.push_back(u);
      unit_times.emplace_back();
      unit_values.emplace_back();
    } else {
      ui = found->second;
    }
    if (!unit_values[ui].emplace(t, value).second) {
      throw ValidationError("panel csv: duplicate observation for (unit=" + u + ", time=" + t +
                            ")");
    }
    unit_times[ui].push_back(t);
  }
  if (units.empty()) throw ValidationError("panel csv: no observations");

  // Every unit must carry exactly the same time sequence.
  std::vector<std::string> times;
  std::set<std::string> seen;
  for (const auto& ts : unit_times) {
    for (const auto& t : ts) {
      if (seen.insert(t).second) times.push_back(t);
    }
  }
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    for (const auto& t : times) {
      if (unit_values[ui].find(t) == unit_values[ui].end()) {
        throw ValidationError("panel csv: missing observation for (unit=" + units[ui] +
                              ", time=" + t + ")");
      }
    }
    if (unit_times[ui] != times) {
      throw ValidationError("panel csv: unit " + units[ui] +
                            " lists periods in a different order than the first unit");
    }
  }

  LongTable table;
  table.unit_labels = units;
  table.time_labels = times;
  table.values.resize(static_cast<Eigen::Index>(times.size()),
                      static_cast<Eigen::Index>(units.size()));
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      table.values(static_cast<Eigen::Index>(ti), static_cast<Eigen::Index>(ui)) =
          unit_values[ui].at(times[ti]);
    }
  }
  return table;
}

LongTable read_long_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("panel csv: cannot open " + path);
  return read_long_csv(in);
}

Eigen::Index t0_from_treat_time(const LongTable& table, const std::string& label) {
  for (std::size_t k = 0; k < table.time_labels.size(); ++k) {
    if (table.time_labels[k] == label) return static_cast<Eigen::Index>(k);
  }
  throw ValidationError("unknown treatment time label: " + label);
}

Panel select_panel(const LongTable& table, const std::string& treated, Eigen::Index t0) {
  std::size_t ti = table.unit_labels.size();
  for (std::size_t k = 0; k < table.unit_labels.size(); ++k) {
    if (table.unit_labels[k] == treated) ti = k;
  }
  if (ti == table.unit_labels.size()) throw ValidationError("unknown treated unit: " + treated);
  Panel p;
  p.time_labels = table.time_labels;
  p.unit_labels.push_back(treated);
  p.outcomes.resize(table.values.rows(), table.values.cols());
  p.outcomes.col(0) = table.values.col(static_cast<Eigen::Index>(ti));
  Eigen::Index col = 1;
  for (std::size_t k = 0; k < table.unit_labels.size(); ++k) {
    if (k == ti) continue;
    p.unit_labels.push_back(table.unit_labels[k]);
    p.outcomes.col(col++) = table.values.col(static_cast<Eigen::Index>(k));
  }
  p.t0 = t0;
  validate_panel(p);
  return p;
}

Panel make_panel(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, Eigen::Index t0) {
  if (y.size() != x.rows()) throw ValidationError("make_panel: y and x differ in length");
  Panel p;
  p.outcomes.resize(x.rows(), x.cols() + 1);
  p.outcomes.col(0) = y;
  p.outcomes.rightCols(x.cols()) = x;
  p.unit_labels.push_back("treated");
  for (Eigen::Index j = 0; j < x.cols(); ++j) p.unit_labels.push_back("donor" + std::to_string(j + 1));
  for (Eigen::Index t = 0; t < x.rows(); ++t) p.time_labels.push_back(std::to_string(t + 1));
  p.t0 = t0;
  validate_panel(p);
  return p;
}

void validate_panel(const Panel& p) {
  if (p.n_donors() < 2) {
    throw ValidationError("panel needs at least 2 donors (got " + std::to_string(p.n_donors()) +
                          ")");
  }
  if (p.t0 < 2) throw ValidationError("panel needs at least 2 pre-treatment periods");
  if (p.t0 >= p.periods()) throw ValidationError("no post-treatment periods");
  if (!p.outcomes.allFinite()) throw ValidationError("panel contains non-finite outcomes");
}

PrePostView split(const Panel& p) {
  validate_panel(p);
  PrePostView v;
  const Eigen::Index t0 = p.t0;
  const Eigen::Index tp = p.t_post();
  const Eigen::Index n0 = p.n_donors();
  v.y_pre = p.outcomes.col(0).head(t0);
  v.y_post = p.outcomes.col(0).tail(tp);
  v.x_pre = p.outcomes.block(0, 1, t0, n0);
  v.x_post = p.outcomes.block(t0, 1, tp, n0);
  return v;
}

PreTreatmentView pre_only(const Panel& p) {
  validate_panel(p);
  PreTreatmentView v;
  v.y_pre = p.outcomes.col(0).head(p.t0);
  v.x_pre = p.outcomes.block(0, 1, p.t0, p.n_donors());
  v.t_post = p.t_post();
  return v;
}

PreTreatmentView pre_only(const PrePostView& view) {
  return PreTreatmentView{view.y_pre, view.x_pre, view.t_post()};
}

}  // namespace hsc
