#pragma once

// Simultaneous diagonalization (Leurgans / Jennrich).
//
// For X = sum_l lambda_l u^1_l o ... o u^K_l and two weights A, B, the
// contractions over mode pair (k, k+1) factor as
//
//   Z_A = U diag(nu_A) V^T,   Z_B = U diag(nu_B) V^T,
//
// with U = [u^k_l], V = [u^{k+1}_l]. Hence
//
//   M1   = Z_A Z_B^+        = U diag(nu_A / nu_B) U^+
//   M2^T = (Z_B^+ Z_A)^T    = V diag(nu_A / nu_B) V^+
//
// share their nonzero spectrum, whose eigenvectors are the factor columns.
// Equal eigenvalues pair a column of U with its column of V.

#include "assignment.hpp"
#include "cp_model.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace trecs {

struct DecompositionTolerances {
  /// Relative numerical-rank tolerance for contractions (times sigma_max * max dim).
  double rankTol = kDefaultRankTol;
  double eigImagTol = kDefaultEigImagTol;
  /// Minimum separation of pairing eigenvalues, relative to the largest.
  double gapTol = 1e-6;
  /// Smallest acceptable |cosine| when matching columns across mode pairs.
  double matchTol = 0.9;
  /// Relative Frobenius reconstruction error above which decomposition fails.
  double reconstructionTol = 1e-8;
  /// Extra weight draws after a degenerate or non-generic one.
  int retries = 3;
};

class ContractionPair {
public:
  /// Detects the numerical rank of both matrices; they must agree.
  ContractionPair(Eigen::MatrixXd Za, Eigen::MatrixXd Zb, std::size_t mode,
                  double rankTol = kDefaultRankTol)
      : Za_(std::move(Za)), Zb_(std::move(Zb)), mode_(mode) {
    if (Za_.rows() != Zb_.rows() || Za_.cols() != Zb_.cols())
      throw ShapeError("contraction pair matrices differ in shape");
    svd_b_ = svd(Zb_);
    const auto ra = numerical_rank(svd(Za_), Za_.rows(), Za_.cols(), rankTol);
    const auto rb = numerical_rank(svd_b_, Zb_.rows(), Zb_.cols(), rankTol);
    if (ra != rb)
      throw DegeneracyError("contractions of mode pair " + std::to_string(mode_) +
                                " have different ranks (" + std::to_string(ra) + " vs " +
                                std::to_string(rb) + ")",
                            static_cast<int>(mode_));
    rank_ = ra;
  }

  const Eigen::MatrixXd &Za() const noexcept { return Za_; }
  const Eigen::MatrixXd &Zb() const noexcept { return Zb_; }
  std::size_t mode() const noexcept { return mode_; }
  Eigen::Index rank() const noexcept { return rank_; }
  const SvdResult &svd_b() const noexcept { return svd_b_; }

private:
  Eigen::MatrixXd Za_, Zb_;
  std::size_t mode_;
  Eigen::Index rank_ = 0;
  SvdResult svd_b_;
};

struct ModeFactors {
  Eigen::MatrixXd left;  // n_k x r
  Eigen::MatrixXd right; // n_{k+1} x r
  /// Shared eigenvalues of M1 and M2^T, one per column, descending.
  Eigen::VectorXd pairingEigenvalues;
  /// Smallest gap between pairing eigenvalues relative to the largest magnitude.
  double minRelativeGap = 0;
};

namespace detail {

struct RealSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline RealSpectrum sorted_real_spectrum(const EigResult &e) {
  const Eigen::Index r = e.effectiveRank;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(r));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return e.values(a).real() > e.values(b).real();
  });
  RealSpectrum s{Eigen::VectorXd(r), Eigen::MatrixXd(e.vectors.rows(), r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    s.values(j) = e.values(idx[static_cast<std::size_t>(j)]).real();
    s.vectors.col(j) = e.vectors.col(idx[static_cast<std::size_t>(j)]);
  }
  return s;
}

} // namespace detail

/// Factor columns of modes k and k+1 from one contraction pair.
inline ModeFactors factors_from_pair(const ContractionPair &p,
                                     const DecompositionTolerances &tol = {}) {
  const Eigen::Index r = p.rank();
  const int mode = static_cast<int>(p.mode());
  if (r == 0)
    return {Eigen::MatrixXd(p.Za().rows(), 0), Eigen::MatrixXd(p.Za().cols(), 0),
            Eigen::VectorXd(0), 0};
  const Eigen::MatrixXd Zb_pinv = truncated_pinv(p.svd_b(), r);
  const Eigen::MatrixXd M1 = p.Za() * Zb_pinv;
  const Eigen::MatrixXd M2t = (Zb_pinv * p.Za()).transpose();

  EigResult e1, e2;
  try {
    e1 = eig_diagonalizable(M1, tol.rankTol, tol.eigImagTol);
    e2 = eig_diagonalizable(M2t, tol.rankTol, tol.eigImagTol);
  } catch (const DegeneracyError &err) {
    throw DegeneracyError(std::string(err.what()) + " (mode pair " + std::to_string(mode) + ")",
                          mode);
  }
  if (e1.effectiveRank != r || e2.effectiveRank != r)
    throw DegeneracyError("mode pair " + std::to_string(mode) + ": eigen-rank (" +
                              std::to_string(e1.effectiveRank) + ", " +
                              std::to_string(e2.effectiveRank) +
                              ") differs from contraction rank " + std::to_string(r),
                          mode);

  const auto s1 = detail::sorted_real_spectrum(e1);
  const auto s2 = detail::sorted_real_spectrum(e2);
  const double scale = s1.values.cwiseAbs().maxCoeff();
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j + 1 < r; ++j)
    gap = std::min(gap, s1.values(j) - s1.values(j + 1));
  if (r > 1 && gap <= tol.gapTol * scale)
    throw GenericityError("mode pair " + std::to_string(mode) +
                              ": pairing eigenvalues not separated (relative gap " +
                              std::to_string(gap / scale) + ")",
                          mode);
  // sorted pairing is only valid if the two spectra agree to within half a gap
  const double mismatch = (s1.values - s2.values).cwiseAbs().maxCoeff();
  if (r > 1 && mismatch >= 0.5 * gap)
    throw GenericityError("mode pair " + std::to_string(mode) +
                              ": spectra of M1 and M2^T disagree by " + std::to_string(mismatch),
                          mode);

  ModeFactors out;
  out.left = s1.vectors;
  out.right = s2.vectors;
  out.pairingEigenvalues = s1.values;
  out.minRelativeGap = r > 1 ? gap / scale : std::numeric_limits<double>::infinity();
  return out;
}

/// Permute and sign-flip the columns of `candidate` (left and right
/// together) so that its left factor matches `reference` column by column.
inline ModeFactors align_factors(const Eigen::MatrixXd &reference, const ModeFactors &candidate,
                                 double matchTol = 0.9) {
  if (reference.rows() != candidate.left.rows() || reference.cols() != candidate.left.cols())
    throw ShapeError("alignment reference and candidate differ in shape");
  const Eigen::Index r = reference.cols();
  Eigen::MatrixXd cosine(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      cosine(i, j) = reference.col(i).dot(candidate.left.col(j)) /
                     (reference.col(i).norm() * candidate.left.col(j).norm());
  const auto assign = min_cost_assignment(-cosine.cwiseAbs());

  ModeFactors out;
  out.left.resize(candidate.left.rows(), r);
  out.right.resize(candidate.right.rows(), r);
  out.pairingEigenvalues.resize(r);
  out.minRelativeGap = candidate.minRelativeGap;
  for (Eigen::Index i = 0; i < r; ++i) {
    const Eigen::Index j = assign[static_cast<std::size_t>(i)];
    const double c = cosine(i, j);
    if (std::abs(c) < matchTol)
      throw AlignmentError("column " + std::to_string(i) + " best match |cosine| " +
                           std::to_string(std::abs(c)) + " below " + std::to_string(matchTol));
    const double sign = c < 0 ? -1.0 : 1.0;
    out.left.col(i) = sign * candidate.left.col(j);
    out.right.col(i) = sign * candidate.right.col(j);
    out.pairingEigenvalues(i) = candidate.pairingEigenvalues(j);
  }
  return out;
}

/// Chain per-mode-pair factors into one factor matrix per mode: pair k is
/// aligned on mode k against the factor obtained from pair k-1.
inline std::vector<Eigen::MatrixXd> chain_factors(const std::vector<ModeFactors> &perPair,
                                                  double matchTol = 0.9) {
  if (perPair.empty())
    throw ArgumentError("no mode-pair factors to chain");
  const Eigen::Index r = perPair.front().left.cols();
  std::vector<Eigen::MatrixXd> factors{perPair.front().left, perPair.front().right};
  for (std::size_t k = 1; k < perPair.size(); ++k) {
    if (perPair[k].left.cols() != r)
      throw DegeneracyError("mode pair " + std::to_string(k) + " has rank " +
                                std::to_string(perPair[k].left.cols()) + ", mode pair 0 has " +
                                std::to_string(r),
                            static_cast<int>(k));
    const auto aligned = align_factors(factors.back(), perPair[k], matchTol);
    factors.push_back(aligned.right);
  }
  return factors;
}

/// Least-squares weights for fixed unit factors against the full tensor.
inline LstsqResult solve_weights(const DenseTensor &X, const std::vector<Eigen::MatrixXd> &factors) {
  const Eigen::Index r = factors.front().cols();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(X.size()), r);
  for (Eigen::Index l = 0; l < r; ++l) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto &f : factors)
      cols.emplace_back(f.col(l));
    design.col(l) = rank_one(cols).as_vector();
  }
  return lstsq(design, X.as_vector());
}

/// Exact CP decomposition of a tensor whose rank does not exceed its
/// smallest dimension. Contraction weights are random unit tensors drawn
/// from `seed`; a degenerate draw is replaced up to `tol.retries` times.
inline CPModel leurgans_decompose(const DenseTensor &X, std::uint64_t seed,
                                  const DecompositionTolerances &tol = {}) {
  const std::size_t K = X.order();
  if (K < 3)
    throw ShapeError("decomposition needs a tensor of order >= 3");
  std::vector<ModeFactors> perPair;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const Dims wdims = remaining_dims(X.dims(), mode_pair(k));
    const auto wsize = static_cast<Eigen::Index>(detail::checked_volume(wdims));
    for (int attempt = 0;; ++attempt) {
      Rng rng(derive_seed(seed, {k, static_cast<std::uint64_t>(attempt)}));
      auto draw = [&] {
        const Eigen::VectorXd v = random_normal(wsize, rng).normalized();
        return DenseTensor(wdims, std::vector<double>(v.data(), v.data() + v.size()));
      };
      const DenseTensor a = draw();
      const DenseTensor b = draw();
      try {
        ContractionPair pair(contract(X, mode_pair(k), a), contract(X, mode_pair(k), b), k,
                             tol.rankTol);
        perPair.push_back(factors_from_pair(pair, tol));
        break;
      } catch (const DegeneracyError &) {
        if (attempt >= tol.retries)
          throw;
      } catch (const GenericityError &) {
        if (attempt >= tol.retries)
          throw;
      }
    }
  }
  const Eigen::Index r = perPair.front().left.cols();
  if (r == 0) {
    std::vector<Eigen::MatrixXd> empty;
    for (auto n : X.dims())
      empty.emplace_back(static_cast<Eigen::Index>(n), 0);
    return {std::move(empty), Eigen::VectorXd(0)};
  }
  auto factors = chain_factors(perPair, tol.matchTol);
  const auto w = solve_weights(X, factors);
  if (w.rankDeficient)
    throw DecompositionError("recovered factors are linearly dependent");
  CPModel model(std::move(factors), w.x);
  const double err = relative_error(cp_evaluate(model), X);
  if (!(err <= tol.reconstructionTol))
    throw DecompositionError("reconstruction error " + std::to_string(err) +
                             " exceeds tolerance " + std::to_string(tol.reconstructionTol));
  return model;
}

} // namespace trecs
