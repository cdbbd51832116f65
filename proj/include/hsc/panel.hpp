#pragma once

#include <Eigen/Dense>

#include <istream>
#include <string>
#include <vector>

namespace hsc {

// Balanced panel in wide form. Column 0 of `outcomes` is the treated unit;
// donors follow in first-appearance order. Rows are periods.
struct Panel {
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  Eigen::MatrixXd outcomes;
  Eigen::Index t0 = 0;

  Eigen::Index n_donors() const { return outcomes.cols() - 1; }
  Eigen::Index periods() const { return outcomes.rows(); }
  Eigen::Index t_post() const { return outcomes.rows() - t0; }
};

struct PrePostView {
  Eigen::VectorXd y_pre;
  Eigen::MatrixXd x_pre;
  Eigen::VectorXd y_post;
  Eigen::MatrixXd x_post;

  Eigen::Index t0() const { return y_pre.size(); }
  Eigen::Index t_post() const { return x_post.rows(); }
  Eigen::Index n_donors() const { return x_pre.cols(); }
};

// Pre-treatment data only. `t_post` is the length of the post block, carried
// as a number so that no post-period outcome can reach the caller.
struct PreTreatmentView {
  Eigen::VectorXd y_pre;
  Eigen::MatrixXd x_pre;
  Eigen::Index t_post = 1;
};

// Long table before a treated unit and t0 are chosen.
struct LongTable {
  std::vector<std::string> unit_labels;
  std::vector<std::string> time_labels;
  Eigen::MatrixXd values;  // periods x units, first-appearance order
};

LongTable read_long_csv(std::istream& in);
LongTable read_long_csv_file(const std::string& path);

// Index of the first post-treatment period with the given label.
Eigen::Index t0_from_treat_time(const LongTable& table, const std::string& label);

Panel select_panel(const LongTable& table, const std::string& treated, Eigen::Index t0);

// y is the treated series (T), x the donors (T x N0).
Panel make_panel(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, Eigen::Index t0);

void validate_panel(const Panel& panel);

PrePostView split(const Panel& panel);
PreTreatmentView pre_only(const Panel& panel);
PreTreatmentView pre_only(const PrePostView& view);

}  // namespace hsc
