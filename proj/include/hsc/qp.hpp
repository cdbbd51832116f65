#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hsc/errors.hpp"
#include "hsc/spectral.hpp"

namespace hsc {

// min_w  w' gram w + 2 linear' w + offset + ridge ||w||^2   s.t. w >= 0, 1'w = 1
template <typename Scalar>
struct SimplexQP {
  Mat<Scalar> gram;
  Vec<Scalar> linear;
  Scalar offset = Scalar(0);
  Scalar ridge = Scalar(0);

  Eigen::Index dim() const { return gram.rows(); }

  template <typename Derived>
  Scalar objective(const Eigen::MatrixBase<Derived>& w) const {
    return w.dot(gram * w) + Scalar(2) * linear.dot(w) + offset + ridge * w.squaredNorm();
  }
  template <typename Derived>
  Vec<Scalar> gradient(const Eigen::MatrixBase<Derived>& w) const {
    return Scalar(2) * (gram * w + ridge * w + linear);
  }
};

// Objective ||C (y - X w)||^2 + ridge ||w||^2 with C the metric square root.
template <typename DC, typename DY, typename DX>
SimplexQP<typename DX::Scalar> build_qp(const Eigen::MatrixBase<DC>& metric_sqrt,
                                        const Eigen::MatrixBase<DY>& y,
                                        const Eigen::MatrixBase<DX>& x,
                                        typename DX::Scalar ridge) {
  using Scalar = typename DX::Scalar;
  if (y.size() != x.rows() || metric_sqrt.cols() != x.rows()) {
    throw ValidationError("build_qp: dimension mismatch");
  }
  if (!(ridge >= Scalar(0))) throw ValidationError("build_qp: ridge must be >= 0");
  const Mat<Scalar> a = metric_sqrt * x;
  const Vec<Scalar> b = metric_sqrt * y;
  SimplexQP<Scalar> qp;
  qp.gram = a.transpose() * a;
  qp.linear = -(a.transpose() * b);
  qp.offset = b.squaredNorm();
  qp.ridge = ridge;
  return qp;
}

// Euclidean projection onto the probability simplex (sort-based).
template <typename Derived>
Vec<typename Derived::Scalar> project_simplex(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  std::vector<Scalar> u(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = v(i);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cumsum = Scalar(0);
  Scalar theta = Scalar(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += u[static_cast<std::size_t>(k)];
    const Scalar t = (cumsum - Scalar(1)) / Scalar(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > Scalar(0)) theta = t;
  }
  return (v.array() - theta).cwiseMax(Scalar(0)).matrix();
}

struct QPOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  bool polish = true;
};

template <typename Scalar>
struct QPSolution {
  Vec<Scalar> weights;
  Scalar objective = Scalar(0);
  int iterations = 0;
  Scalar kkt_residual = Scalar(0);
};

template <typename Scalar>
class QpNotConverged : public NumericalError {
 public:
  QpNotConverged(const std::string& what, QPSolution<Scalar> best)
      : NumericalError(what), best_(std::move(best)) {}
  const QPSolution<Scalar>& best() const { return best_; }

 private:
  QPSolution<Scalar> best_;
};

namespace detail {

template <typename Scalar>
Scalar kkt_from_gradient(const Vec<Scalar>& g, const Vec<Scalar>& w) {
  const Scalar lo = g.minCoeff();
  Scalar hi = lo;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > Scalar(0)) hi = std::max(hi, g(i));
  }
  return hi - lo;
}

template <typename Scalar>
Scalar power_max_eigenvalue(const Mat<Scalar>& h, int iters) {
  const Eigen::Index n = h.rows();
  Vec<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Scalar(1) + Scalar(i) / Scalar(n + 1);
  v.normalize();
  Scalar lambda = Scalar(0);
  for (int k = 0; k < iters; ++k) {
    Vec<Scalar> hv = h * v;
    const Scalar norm = hv.norm();
    if (norm == Scalar(0)) return Scalar(0);
    const Scalar next = v.dot(hv);
    v = hv / norm;
    if (std::abs(next - lambda) <= Scalar(1e-10) * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace detail

// Projected-gradient stationarity gap: spread of the gradient over the
// support against its minimum. Zero exactly at a KKT point.
template <typename Scalar, typename Derived>
Scalar kkt_residual(const SimplexQP<Scalar>& qp, const Eigen::MatrixBase<Derived>& w) {
  return detail::kkt_from_gradient<Scalar>(qp.gradient(w), w);
}

// Scale used to make the stopping rule relative to the problem.
template <typename Scalar>
Scalar kkt_scale(const SimplexQP<Scalar>& qp, const Vec<Scalar>& g) {
  Scalar s = g.cwiseAbs().maxCoeff();
  if (qp.dim() > 0) {
    s = std::max(s, qp.gram.cwiseAbs().maxCoeff() + qp.ridge);
    s = std::max(s, qp.linear.cwiseAbs().maxCoeff());
  }
  return Scalar(1) + s;
}

// Accelerated projected gradient with function-value restart and an
// equality-constrained polish on the identified support.
template <typename Scalar>
QPSolution<Scalar> solve(const SimplexQP<Scalar>& qp, const QPOptions& opts = {},
                         const Vec<Scalar>* initial = nullptr) {
  const Eigen::Index n = qp.dim();
  if (n == 0) throw ValidationError("solve: empty QP");
  if (qp.gram.cols() != n || qp.linear.size() != n) {
    throw ValidationError("solve: QP dimension mismatch");
  }
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Mat<Scalar> h = qp.gram;
  h = (Scalar(0.5) * (h + h.transpose())).eval();
  h.diagonal().array() += qp.ridge;
  const Vec<Scalar>& c = qp.linear;

  auto value = [&](const Vec<Scalar>& x, const Vec<Scalar>& hx) {
    return x.dot(hx) + Scalar(2) * c.dot(x) + qp.offset;
  };

  Vec<Scalar> x;
  if (initial != nullptr && initial->size() == n && initial->allFinite()) {
    x = project_simplex(*initial);
  } else {
    x = Vec<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  }
  Vec<Scalar> hx = h * x;
  Scalar f = value(x, hx);

  Scalar lip = Scalar(2) * detail::power_max_eigenvalue(h, 300) * Scalar(1.05);
  bool refreshed = false;
  if (!(lip > Scalar(0))) lip = Scalar(1);

  Vec<Scalar> y = x;
  Vec<Scalar> hy = hx;
  Scalar t = Scalar(1);

  Vec<Scalar> g = Scalar(2) * (hx + c);
  const Scalar scale = kkt_scale(qp, g);
  const Scalar target = Scalar(opts.tol) * scale;
  Scalar kkt = detail::kkt_from_gradient(g, x);

  auto slack = [&](Scalar fv) {
    return Scalar(16) * eps * (Scalar(1) + std::abs(fv) + std::abs(qp.offset));
  };

  std::vector<bool> support(static_cast<std::size_t>(n));
  auto support_of = [&](const Vec<Scalar>& v) {
    std::vector<bool> s(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = v(i) > Scalar(0);
    return s;
  };
  support = support_of(x);
  int stable = 0;
  int last_polish = -1000;

  auto try_polish = [&]() -> bool {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i) > Scalar(0)) idx.push_back(i);
    }
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Mat<Scalar> kkt_mat = Mat<Scalar>::Zero(m + 1, m + 1);
    Vec<Scalar> rhs(m + 1);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) kkt_mat(a, b) = h(idx[a], idx[b]);
      kkt_mat(a, m) = Scalar(-1);
      kkt_mat(m, a) = Scalar(1);
      rhs(a) = -c(idx[a]);
    }
    rhs(m) = Scalar(1);
    Eigen::FullPivLU<Mat<Scalar>> lu(kkt_mat);
    if (!lu.isInvertible()) return false;
    const Vec<Scalar> z = lu.solve(rhs);
    if (!z.allFinite()) return false;
    Vec<Scalar> xp = Vec<Scalar>::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) {
      if (z(a) < Scalar(0)) return false;
      xp(idx[a]) = z(a);
    }
    const Scalar sum = xp.sum();
    if (!(sum > Scalar(0))) return false;
    xp /= sum;
    const Vec<Scalar> hxp = h * xp;
    const Scalar fp = value(xp, hxp);
    if (fp > f + slack(f)) return false;
    const Vec<Scalar> gp = Scalar(2) * (hxp + c);
    const Scalar kp = detail::kkt_from_gradient(gp, xp);
    if (kp > kkt && fp >= f) return false;
    x = xp;
    hx = hxp;
    f = fp;
    g = gp;
    kkt = kp;
    y = x;
    hy = hx;
    t = Scalar(1);
    return true;
  };

  int it = 0;
  while (kkt > target) {
    if (it >= opts.max_iter) {
      QPSolution<Scalar> best{x, f, it, kkt};
      throw QpNotConverged<Scalar>(
          "QP did not converge in " + std::to_string(opts.max_iter) +
              " iterations (kkt residual " + std::to_string(static_cast<double>(kkt)) + ")",
          std::move(best));
    }
    ++it;
    Vec<Scalar> gy = Scalar(2) * (hy + c);
    Vec<Scalar> xn = project_simplex((y - gy / lip).eval());
    Vec<Scalar> hxn = h * xn;
    Scalar fn = value(xn, hxn);
    bool restart = false;
    if (fn > f + slack(f)) {
      restart = true;
      xn = project_simplex((x - g / lip).eval());
      hxn = h * xn;
      fn = value(xn, hxn);
      if (fn > f + slack(f)) {
        if (!refreshed) {
          // Gershgorin bound: a guaranteed Lipschitz constant.
          lip = std::max(lip, Scalar(2) * h.cwiseAbs().rowwise().sum().maxCoeff());
          refreshed = true;
        } else {
          lip *= Scalar(2);
        }
        y = x;
        hy = hx;
        t = Scalar(1);
        continue;
      }
    }
    if (restart) {
      t = Scalar(1);
      y = xn;
      hy = hxn;
    } else {
      const Scalar tn = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
      const Scalar beta = (t - Scalar(1)) / tn;
      y = xn + beta * (xn - x);
      hy = hxn + beta * (hxn - hx);
      t = tn;
    }
    x = std::move(xn);
    hx = std::move(hxn);
    f = fn;
    g = Scalar(2) * (hx + c);
    kkt = detail::kkt_from_gradient(g, x);

    auto s = support_of(x);
    stable = (s == support) ? stable + 1 : 0;
    support = std::move(s);
    if (opts.polish && kkt > target && stable >= 3 && it - last_polish >= 10) {
      last_polish = it;
      try_polish();
    }
  }

  // Clamp numerically-zero weights and renormalize.
  bool clamped = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x(i) < Scalar(1e-12)) {
      if (x(i) != Scalar(0)) clamped = true;
      x(i) = Scalar(0);
    }
  }
  if (clamped) {
    x /= x.sum();
    hx = h * x;
    f = value(x, hx);
    g = Scalar(2) * (hx + c);
    kkt = detail::kkt_from_gradient(g, x);
  }
  return QPSolution<Scalar>{x, f, it, kkt};
}

}  // namespace hsc
