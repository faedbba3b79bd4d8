#pragma once

// Dense kernels used by the recovery pipeline. Decompositions are delegated
// to Eigen (divide-and-conquer SVD, real Schur based EigenSolver); this header
// adds the rank conventions and failure checks the pipeline relies on.

#include "error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

namespace trecs {

/// Relative rank tolerance: singular values at or below
/// kDefaultRankTol * sigma_max * max(rows, cols) count as zero.
inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kDefaultEigImagTol = 1e-6;

struct SvdResult {
  Eigen::MatrixXd U;
  Eigen::VectorXd S; // nonincreasing
  Eigen::MatrixXd V;
};

/// Thin SVD  A = U diag(S) V^T.
inline SvdResult svd(const Eigen::MatrixXd &A) {
  if (!A.allFinite())
    throw ArgumentError("svd: matrix has non-finite entries");
  if (A.size() == 0)
    return {Eigen::MatrixXd(A.rows(), 0), Eigen::VectorXd(0), Eigen::MatrixXd(A.cols(), 0)};
  Eigen::BDCSVD<Eigen::MatrixXd> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw NumericalError("svd: decomposition did not converge");
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

/// Absolute singular-value cutoff for a given relative tolerance.
inline double rank_threshold(const Eigen::VectorXd &S, Eigen::Index rows,
                             Eigen::Index cols, double rankTol = kDefaultRankTol) {
  if (S.size() == 0)
    return 0.0;
  return rankTol * S(0) * static_cast<double>(std::max(rows, cols));
}

inline Eigen::Index numerical_rank(const SvdResult &s, Eigen::Index rows,
                                   Eigen::Index cols, double rankTol = kDefaultRankTol) {
  const double thr = rank_threshold(s.S, rows, cols, rankTol);
  Eigen::Index r = 0;
  while (r < s.S.size() && s.S(r) > thr)
    ++r;
  return r;
}

inline Eigen::Index numerical_rank(const Eigen::MatrixXd &A,
                                   double rankTol = kDefaultRankTol) {
  return numerical_rank(svd(A), A.rows(), A.cols(), rankTol);
}

/// Pseudoinverse keeping the leading `rank` singular triplets.
inline Eigen::MatrixXd truncated_pinv(const SvdResult &s, Eigen::Index rank) {
  const Eigen::Index r = std::min<Eigen::Index>(rank, s.S.size());
  return s.V.leftCols(r) * s.S.head(r).cwiseInverse().asDiagonal() *
         s.U.leftCols(r).transpose();
}

/// Moore-Penrose pseudoinverse with singular values below the relative
/// cutoff treated as zero.
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd &A, double rankTol = kDefaultRankTol) {
  if (!(rankTol > 0))
    throw ArgumentError("pinv: rankTol must be positive");
  const auto s = svd(A);
  if (s.S.size() == 0)
    return Eigen::MatrixXd::Zero(A.cols(), A.rows());
  return truncated_pinv(s, numerical_rank(s, A.rows(), A.cols(), rankTol));
}

/// Truncate A to its leading `rank` singular triplets.
inline Eigen::MatrixXd truncate_rank(const SvdResult &s, Eigen::Index rank) {
  const Eigen::Index r = std::min<Eigen::Index>(rank, s.S.size());
  return s.U.leftCols(r) * s.S.head(r).asDiagonal() * s.V.leftCols(r).transpose();
}

/// Singular value soft-thresholding, the prox of tau * nuclear norm.
inline Eigen::MatrixXd svt(const Eigen::MatrixXd &A, double tau) {
  if (!(tau >= 0))
    throw ArgumentError("svt: tau must be nonnegative");
  if (tau == 0)
    return A;
  const auto s = svd(A);
  Eigen::Index keep = 0;
  while (keep < s.S.size() && s.S(keep) > tau)
    ++keep;
  const Eigen::VectorXd shrunk = (s.S.head(keep).array() - tau).matrix();
  return s.U.leftCols(keep) * shrunk.asDiagonal() * s.V.leftCols(keep).transpose();
}

struct EigResult {
  /// All eigenvalues, ordered by decreasing magnitude.
  Eigen::VectorXcd values;
  /// Real unit eigenvectors for the first `effectiveRank` values, with the
  /// largest-magnitude entry of each column nonnegative.
  Eigen::MatrixXd vectors;
  Eigen::Index effectiveRank = 0;
  /// Smallest pairwise distance among kept eigenvalues divided by max |value|;
  /// +inf when fewer than two are kept.
  double minRelativeGap = std::numeric_limits<double>::infinity();
};

namespace detail {

inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0)
    v = -v;
}

} // namespace detail

/// Eigen-decomposition of a real matrix expected to be diagonalizable with
/// real spectrum (e.g. U D U^+). Eigenvalues with |value| > rankTol * max|value|
/// are kept; a kept eigenvalue with imaginary part >= eigImagTol * max|value|
/// raises DegeneracyError.
inline EigResult eig_diagonalizable(const Eigen::MatrixXd &M,
                                    double rankTol = kDefaultRankTol,
                                    double eigImagTol = kDefaultEigImagTol) {
  if (M.rows() != M.cols())
    throw ShapeError("eig_diagonalizable: matrix must be square");
  if (!M.allFinite())
    throw ArgumentError("eig_diagonalizable: matrix has non-finite entries");
  EigResult out;
  const Eigen::Index n = M.rows();
  if (n == 0) {
    out.vectors.resize(0, 0);
    return out;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, true);
  if (es.info() != Eigen::Success)
    throw NumericalError("eig_diagonalizable: QR iteration did not converge");

  const Eigen::VectorXcd vals = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(vals(a)) > std::abs(vals(b));
  });

  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.values(i) = vals(order[static_cast<std::size_t>(i)]);
  const double vmax = std::abs(out.values(0));
  while (out.effectiveRank < n &&
         std::abs(out.values(out.effectiveRank)) > rankTol * vmax)
    ++out.effectiveRank;

  out.vectors.resize(n, out.effectiveRank);
  for (Eigen::Index j = 0; j < out.effectiveRank; ++j) {
    const auto lam = out.values(j);
    if (std::abs(lam.imag()) >= eigImagTol * vmax)
      throw DegeneracyError("eigenvalue " + std::to_string(lam.real()) + (lam.imag() < 0 ? "" : "+") +
                            std::to_string(lam.imag()) +
                            "i has a significant imaginary part");
    Eigen::VectorXcd v = vecs.col(order[static_cast<std::size_t>(j)]);
    // rotate so the dominant entry is real before dropping the imaginary part
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    v *= std::conj(v(arg)) / std::abs(v(arg));
    Eigen::VectorXd re = v.real();
    re.normalize();
    detail::canonical_sign(re);
    out.vectors.col(j) = re;
  }
  for (Eigen::Index i = 0; i < out.effectiveRank; ++i)
    for (Eigen::Index j = i + 1; j < out.effectiveRank; ++j)
      out.minRelativeGap =
          std::min(out.minRelativeGap, std::abs(out.values(i) - out.values(j)) / vmax);
  return out;
}

struct LstsqResult {
  Eigen::VectorXd x;
  Eigen::Index rank = 0;
  bool rankDeficient = false;
  /// ||A x - b|| / ||b|| (absolute residual when b = 0).
  double relativeResidual = 0;
};

/// Minimum-norm least-squares solution via SVD.
inline LstsqResult lstsq(const Eigen::MatrixXd &A, const Eigen::VectorXd &b,
                         double rankTol = kDefaultRankTol) {
  if (A.rows() != b.size())
    throw ShapeError("lstsq: right-hand side length does not match rows");
  if (A.rows() < A.cols())
    throw ShapeError("lstsq: system must not be underdetermined");
  LstsqResult out;
  const auto s = svd(A);
  out.rank = numerical_rank(s, A.rows(), A.cols(), rankTol);
  out.rankDeficient = out.rank < A.cols();
  out.x = truncated_pinv(s, out.rank) * b;
  const double res = (A * out.x - b).norm();
  const double nb = b.norm();
  out.relativeResidual = nb > 0 ? res / nb : res;
  return out;
}

} // namespace trecs
