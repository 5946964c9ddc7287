#pragma once

// Proximal operators and cached linear solves used by the ADMM updates.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

// sign(a) * max(|a| - phi, 0)
inline double soft_threshold(double a, double phi) {
  const double mag = std::abs(a) - phi;
  return mag > 0.0 ? std::copysign(mag, a) : 0.0;
}

inline void check_threshold(double phi) {
  detail::require(phi >= 0.0 && !std::isnan(phi), ErrorKind::invalid_argument,
                  "threshold must be nonnegative, got " + std::to_string(phi));
}

inline std::vector<double> soft_threshold(std::span<const double> a, double phi) {
  check_threshold(phi);
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(), [phi](double v) { return soft_threshold(v, phi); });
  return out;
}

inline DenseTensor soft_threshold(DenseTensor t, double phi) {
  check_threshold(phi);
  for (double& v : t.values()) v = soft_threshold(v, phi);
  return t;
}

inline Matrix soft_threshold(Matrix m, double phi) {
  check_threshold(phi);
  m = m.unaryExpr([phi](double v) { return soft_threshold(v, phi); });
  return m;
}

struct SvtResult {
  Matrix value;
  Index rank = 0;  // singular values strictly above the threshold
};

// Singular value thresholding: U * eta(Sigma, phi) * V^T over a thin SVD.
// This is the prox of phi * ||.||_* at m.
// Numerical rank with singular values below 1e-12 * sigma_max treated as zero.
inline Index numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  return (s.array() > 1e-12 * s[0]).count();
}

inline SvtResult svt_with_rank(const Matrix& m, double phi) {
  check_threshold(phi);
  detail::require(m.allFinite(), ErrorKind::numerical, "svt: input matrix has non-finite entries");
  if (m.size() == 0) return {m, 0};
  if (phi == 0.0) return {m, numerical_rank(m)};
  // Unfoldings are short and wide, so work with the small Gram matrix:
  // M = U S V^T gives svt(M) = U diag(1 - phi/s) U^T M over the kept s > phi.
  const bool wide = m.rows() <= m.cols();
  const Matrix gram = wide ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  detail::require(eig.info() == Eigen::Success, ErrorKind::numerical, "svt: eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();  // ascending
  std::vector<Index> keep;
  for (Index i = ev.size() - 1; i >= 0; --i) {
    const double s = std::sqrt(std::max(ev[i], 0.0));
    if (s <= phi) break;
    keep.push_back(i);
  }
  SvtResult out;
  out.rank = static_cast<Index>(keep.size());
  if (out.rank == 0) {
    out.value = Matrix::Zero(m.rows(), m.cols());
    return out;
  }
  Matrix u(gram.rows(), out.rank);
  Vector factor(out.rank);
  for (Index j = 0; j < out.rank; ++j) {
    u.col(j) = eig.eigenvectors().col(keep[j]);
    factor[j] = 1.0 - phi / std::sqrt(ev[keep[j]]);
  }
  if (wide)
    out.value.noalias() = u * factor.asDiagonal() * (u.transpose() * m);
  else
    out.value.noalias() = (m * u) * factor.asDiagonal() * u.transpose();
  return out;
}

inline Matrix svt(const Matrix& m, double phi) { return svt_with_rank(m, phi).value; }

inline double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(m).singularValues().sum();
}

// Circulant first-difference operator along the hour-of-day mode:
// row i has +1 at i and -1 at i+1, the last row wraps to column 0.
struct DiffOperator {
  Matrix matrix;

  Index size() const { return matrix.rows(); }
};

inline DiffOperator build_diff_operator(Index n) {
  detail::require(n >= 2, ErrorKind::invalid_argument,
                  "difference operator needs at least 2 samples, got " + std::to_string(n));
  DiffOperator d{Matrix::Zero(n, n)};
  for (Index i = 0; i + 1 < n; ++i) {
    d.matrix(i, i) = 1.0;
    d.matrix(i, i + 1) = -1.0;
  }
  d.matrix(n - 1, 0) = -1.0;
  d.matrix(n - 1, n - 1) = 1.0;
  return d;
}

enum class InverseKind { graph, total_variation };

// Materialized inverse of a symmetric positive-definite system matrix.
struct CachedInverse {
  Matrix matrix;
  InverseKind kind;
};

namespace detail {

inline Matrix spd_inverse(const Matrix& a, const std::string& what) {
  Eigen::LLT<Matrix> llt(a);
  require(llt.info() == Eigen::Success, ErrorKind::numerical, what + ": system matrix is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  // Symmetrize away rounding so downstream products stay symmetric.
  return 0.5 * (inv + inv.transpose());
}

}  // namespace detail

// (theta * laplacian + beta3 * I)^{-1}
inline CachedInverse precompute_graph_inverse(const Matrix& laplacian, double theta, double beta3) {
  detail::require(laplacian.rows() == laplacian.cols(), ErrorKind::shape_mismatch, "laplacian must be square");
  detail::require(theta >= 0.0, ErrorKind::invalid_argument, "theta must be nonnegative");
  detail::require(beta3 > 0.0, ErrorKind::invalid_argument, "beta3 must be positive");
  detail::require(laplacian.isApprox(laplacian.transpose(), 1e-12) || laplacian.norm() == 0.0,
                  ErrorKind::numerical, "laplacian must be symmetric");
  Matrix a = theta * laplacian;
  a.diagonal().array() += beta3;
  return {detail::spd_inverse(a, "graph inverse"), InverseKind::graph};
}

// (beta5 * I + beta4 * D^T D)^{-1}
inline CachedInverse precompute_tv_inverse(const DiffOperator& diff, double beta4, double beta5) {
  detail::require(beta4 >= 0.0, ErrorKind::invalid_argument, "beta4 must be nonnegative");
  detail::require(beta5 > 0.0, ErrorKind::invalid_argument, "beta5 must be positive");
  Matrix a = beta4 * (diff.matrix.transpose() * diff.matrix);
  a.diagonal().array() += beta5;
  return {detail::spd_inverse(a, "tv inverse"), InverseKind::total_variation};
}

}  // namespace gloss
