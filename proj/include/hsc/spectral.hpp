#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "hsc/errors.hpp"

namespace hsc {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Relative cutoff below which a penalty eigenvalue counts as zero.
inline constexpr double kNullTolerance = 1e-9;

// q-th order forward difference operator, (n - q) x n.
template <typename Scalar = double>
Mat<Scalar> difference_operator(Eigen::Index n, int q) {
  if (q < 1) throw ValidationError("difference order q must be >= 1");
  if (n < q + 1) throw ValidationError("difference operator needs n >= q + 1");
  Mat<Scalar> d = Mat<Scalar>::Identity(n, n);
  for (int k = 0; k < q; ++k) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d;
}

template <typename Scalar = double>
Mat<Scalar> penalty_matrix(Eigen::Index n, int q) {
  const Mat<Scalar> d = difference_operator<Scalar>(n, q);
  return d.transpose() * d;
}

template <typename Scalar>
struct EigenPairs {
  Vec<Scalar> values;   // ascending
  Mat<Scalar> vectors;  // orthonormal columns
  int sweeps = 0;
};

// Cyclic Jacobi for symmetric matrices. A rotation is skipped once the
// off-diagonal entry is negligible relative to the geometric mean of the two
// diagonal entries, which keeps small eigenvalues accurate.
template <typename Derived>
EigenPairs<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input,
                                                  int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  const Eigen::Index n = input.rows();
  if (input.cols() != n) throw ValidationError("jacobi_eigen: matrix is not square");
  Mat<Scalar> a = input;
  const Scalar scale = a.cwiseAbs().maxCoeff();
  if (n > 0 && ((a - a.transpose()).cwiseAbs().maxCoeff() >
                Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (scale + Scalar(1)))) {
    throw ValidationError("jacobi_eigen: matrix is not symmetric");
  }
  Mat<Scalar> v = Mat<Scalar>::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar tiny = std::numeric_limits<Scalar>::min() / eps;

  EigenPairs<Scalar> out;
  bool converged = n <= 1;
  int sweep = 0;
  while (!converged && sweep < max_sweeps) {
    ++sweep;
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        const Scalar app = a(p, p);
        const Scalar aqq = a(q, q);
        if (abs(apq) <= tiny || abs(apq) <= eps * sqrt(abs(app * aqq))) {
          a(p, q) = Scalar(0);
          a(q, p) = Scalar(0);
          continue;
        }
        rotated = true;
        const Scalar theta = (aqq - app) / (Scalar(2) * apq);
        Scalar t = Scalar(1) / (abs(theta) + sqrt(theta * theta + Scalar(1)));
        if (theta < Scalar(0)) t = -t;
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          const Scalar np = c * akp - s * akq;
          const Scalar nq = s * akp + c * akq;
          a(k, p) = np;
          a(p, k) = np;
          a(k, q) = nq;
          a(q, k) = nq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = Scalar(0);
        a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw NumericalError("jacobi_eigen: no convergence after " + std::to_string(sweep) +
                         " sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = a(src, src);
    out.vectors.col(j) = v.col(src);
    // Fix the sign so that the largest-magnitude entry is positive.
    Eigen::Index imax = 0;
    out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.vectors(imax, j) < Scalar(0)) out.vectors.col(j) *= Scalar(-1);
  }
  out.sweeps = sweep;
  return out;
}

template <typename Scalar>
struct SpectralBasis {
  Eigen::Index n = 0;
  int q = 1;
  int null_dim = 0;
  Vec<Scalar> eigenvalues;   // ascending, mu_1 <= ... <= mu_n
  Mat<Scalar> eigenvectors;  // columns v_j

  Mat<Scalar> null_projector() const {
    const auto v0 = eigenvectors.leftCols(null_dim);
    return v0 * v0.transpose();
  }
  Mat<Scalar> orth_projector() const {
    const auto v1 = eigenvectors.rightCols(n - null_dim);
    return v1 * v1.transpose();
  }
  // Eigenvalue with the null block snapped to exact zero.
  Scalar mu(Eigen::Index j) const { return j < null_dim ? Scalar(0) : eigenvalues(j); }
};

// Eigenbasis of K_q. The null space (polynomials of degree < q) is known in
// closed form, so it is split off exactly and Jacobi runs on the orthogonal
// complement. This keeps P0 exact even when the first positive eigenvalue is
// tiny (q = 2, long series).
template <typename Scalar = double>
SpectralBasis<Scalar> spectral_basis(Eigen::Index n, int q) {
  if (q != 1 && q != 2) throw ValidationError("q must be 1 or 2");
  if (n < q + 1) {
    throw ValidationError("spectral basis needs n >= q + 1 (n=" + std::to_string(n) +
                          ", q=" + std::to_string(q) + ")");
  }
  Mat<Scalar> poly(n, q);
  const Scalar centre = Scalar(n - 1) / Scalar(2);
  for (Eigen::Index t = 0; t < n; ++t) {
    poly(t, 0) = Scalar(1);
    if (q == 2) poly(t, 1) = (Scalar(t) - centre) / Scalar(n);
  }
  Eigen::HouseholderQR<Mat<Scalar>> qr(poly);
  const Mat<Scalar> full_q = qr.householderQ();
  const Mat<Scalar> complement = full_q.rightCols(n - q);
  const Mat<Scalar> k = penalty_matrix<Scalar>(n, q);
  Mat<Scalar> kc = complement.transpose() * k * complement;
  kc = (Scalar(0.5) * (kc + kc.transpose())).eval();
  auto eig = jacobi_eigen(kc);

  SpectralBasis<Scalar> b;
  b.n = n;
  b.q = q;
  b.null_dim = q;
  const Scalar top = eig.values(n - q - 1);
  if (!(eig.values(0) > Scalar(kNullTolerance) * top)) {
    throw NumericalError("spectral basis: null space of dimension " + std::to_string(q) +
                         " is not separated at n=" + std::to_string(n));
  }
  b.eigenvalues.resize(n);
  b.eigenvalues.head(q).setZero();
  b.eigenvalues.tail(n - q) = eig.values;
  b.eigenvectors.resize(n, n);
  b.eigenvectors.leftCols(q) = full_q.leftCols(q);
  b.eigenvectors.rightCols(n - q) = complement * eig.vectors;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index imax = 0;
    b.eigenvectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (b.eigenvectors(imax, j) < Scalar(0)) b.eigenvectors.col(j) *= Scalar(-1);
  }
  return b;
}

template <typename Scalar>
struct Gains {
  Scalar shrink;  // s(mu; rho)
  Scalar match;   // w(mu; rho)
};

template <typename Scalar>
void check_rho(Scalar rho) {
  if (!(rho >= Scalar(0) && rho <= Scalar(1))) {
    throw ValidationError("rho must lie in [0, 1]");
  }
}

template <typename Scalar>
Gains<Scalar> gains(Scalar mu, Scalar rho) {
  check_rho(rho);
  if (mu < Scalar(0)) mu = Scalar(0);
  const bool null = mu <= Scalar(kNullTolerance);
  if (rho == Scalar(0)) return {Scalar(1), null ? Scalar(0) : mu};
  if (rho == Scalar(1)) return {null ? Scalar(1) : Scalar(0), null ? Scalar(0) : Scalar(1)};
  if (null) return {Scalar(1), Scalar(0)};
  const Scalar denom = (Scalar(1) - rho) + rho * mu;
  return {(Scalar(1) - rho) / denom, mu / denom};
}

// The rho-indexed smoother S = V diag(s) V' and metric W = V diag(w) V'.
template <typename Scalar>
class RhoMetric {
 public:
  RhoMetric(std::shared_ptr<const SpectralBasis<Scalar>> basis, Scalar rho)
      : basis_(std::move(basis)), rho_(rho) {
    check_rho(rho);
    const Eigen::Index n = basis_->n;
    shrink_.resize(n);
    match_.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Gains<Scalar> g = j < basis_->null_dim ? gains(Scalar(0), rho)
                                                   : gains(basis_->eigenvalues(j), rho);
      shrink_(j) = g.shrink;
      match_(j) = g.match;
    }
  }

  const SpectralBasis<Scalar>& basis() const { return *basis_; }
  std::shared_ptr<const SpectralBasis<Scalar>> basis_ptr() const { return basis_; }
  Scalar rho() const { return rho_; }
  const Vec<Scalar>& shrink() const { return shrink_; }
  const Vec<Scalar>& match() const { return match_; }

  Mat<Scalar> smoother() const { return spectral_matrix(shrink_); }
  Mat<Scalar> metric() const { return spectral_matrix(match_); }
  Mat<Scalar> metric_sqrt() const { return spectral_matrix(match_.cwiseSqrt().eval()); }

  template <typename Derived>
  Vec<Scalar> smooth(const Eigen::MatrixBase<Derived>& r) const {
    const auto& v = basis_->eigenvectors;
    return v * shrink_.cwiseProduct(v.transpose() * r);
  }

  template <typename Derived>
  Scalar quadform(const Eigen::MatrixBase<Derived>& r) const {
    const Vec<Scalar> c = basis_->eigenvectors.transpose() * r;
    return (match_.array() * c.array().square()).sum();
  }

  // C~ M with C~ = W^{1/2}.
  template <typename Derived>
  Mat<Scalar> sqrt_transform(const Eigen::MatrixBase<Derived>& m) const {
    const auto& v = basis_->eigenvectors;
    return v * (match_.cwiseSqrt().asDiagonal() * (v.transpose() * m));
  }

 private:
  Mat<Scalar> spectral_matrix(const Vec<Scalar>& d) const {
    const auto& v = basis_->eigenvectors;
    return v * d.asDiagonal() * v.transpose();
  }

  std::shared_ptr<const SpectralBasis<Scalar>> basis_;
  Scalar rho_;
  Vec<Scalar> shrink_;
  Vec<Scalar> match_;
};

// (I + lambda K)^{-1} r by a direct solve, lambda = rho / (1 - rho). Cross-check
// for RhoMetric::smooth on rho in [0, 1).
template <typename Derived>
Vec<typename Derived::Scalar> smoother_direct(const Eigen::MatrixBase<Derived>& r, int q,
                                             typename Derived::Scalar rho) {
  using Scalar = typename Derived::Scalar;
  check_rho(rho);
  if (rho == Scalar(1)) throw ValidationError("smoother_direct: rho = 1 has no finite lambda");
  const Eigen::Index n = r.size();
  const Scalar lambda = rho / (Scalar(1) - rho);
  const Mat<Scalar> a = Mat<Scalar>::Identity(n, n) + lambda * penalty_matrix<Scalar>(n, q);
  return a.ldlt().solve(r.derived());
}

}  // namespace hsc
