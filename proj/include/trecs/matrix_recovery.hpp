#pragma once

// Nuclear-norm minimization under affine constraints:
//
//   minimize ||Z||_*   subject to   T(Z) = y.
//
// Solved by Douglas-Rachford splitting between the nuclear-norm prox
// (singular value thresholding) and the exact Euclidean projection onto the
// affine set {Z : T(Z) = y}. The fixed point is feasible by construction,
// so no penalty bias has to be driven out of the solution; the threshold
// only sets the pace. It follows a geometric continuation path from a large
// starting value down to a floor.

#include "error.hpp"
#include "linalg.hpp"
#include "measurement.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

namespace trecs {

/// Threshold schedule: tau_t = max(initial * decay^t, floor), all relative
/// to the spectral norm of the minimum-norm feasible point.
struct PenaltyPath {
  double initial = 0.5;
  double decay = 0.9;
  double floor = 0.1;
};

struct SolverConfig {
  int maxIters = 5000;
  /// Stop when ||Z_t - Z_{t-1}||_F <= relTol * ||Z_t||_F.
  double relTol = 1e-9;
  /// A solve only counts as converged when ||T(Z) - y|| / ||y|| is below this.
  double feasTol = 1e-7;
  PenaltyPath penaltyPath{};
  /// Singular values below rankTol * sigma_max are dropped from the result.
  double rankTol = 1e-8;

  void validate() const {
    if (maxIters < 1)
      throw ArgumentError("maxIters must be at least 1");
    if (!(relTol > 0) || !(feasTol > 0) || !(rankTol > 0))
      throw ArgumentError("solver tolerances must be positive");
    if (!(penaltyPath.initial > 0) || !(penaltyPath.floor > 0) ||
        !(penaltyPath.decay > 0 && penaltyPath.decay <= 1))
      throw ArgumentError("penalty path needs positive values and decay in (0, 1]");
  }
};

struct RecoveredMatrix {
  Eigen::MatrixXd Z;
  /// ||T(Z) - y|| / ||y|| (absolute when y = 0)
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  Eigen::Index numericalRank = 0;
  double nuclearNorm = 0;
};

inline double nuclear_norm(const Eigen::MatrixXd &Z) {
  if (!Z.allFinite())
    throw ArgumentError("nuclear_norm: non-finite entries");
  if (Z.size() == 0)
    return 0.0;
  return svd(Z).S.sum();
}

namespace detail {

/// Projection onto {Z : A vec(Z) = y} for a dense constraint matrix.
class AffineProjector {
public:
  AffineProjector(Eigen::MatrixXd A, const Eigen::VectorXd &y, Eigen::Index rows,
                  Eigen::Index cols)
      : A_(std::move(A)), y_(y), rows_(rows), cols_(cols) {
    const Eigen::Index m = A_.rows(), n = A_.cols();
    if (m < n) {
      gram_.compute(A_ * A_.transpose());
      use_gram_ = gram_.info() == Eigen::Success && gram_.rcond() > 1e-12;
    }
    if (!use_gram_) {
      // rank-deficient or overdetermined: project with the row-space basis
      const auto s = svd(A_);
      const Eigen::Index r = numerical_rank(s, m, n);
      basis_ = s.V.leftCols(r);
      offset_ = truncated_pinv(s, r) * y_;
    }
  }

  Eigen::MatrixXd operator()(const Eigen::MatrixXd &Z) const {
    Eigen::VectorXd z = Z.reshaped();
    if (use_gram_) {
      const Eigen::VectorXd r = A_ * z - y_;
      z -= A_.transpose() * gram_.solve(r);
    } else {
      z = z - basis_ * (basis_.transpose() * z) + offset_;
    }
    return z.reshaped(rows_, cols_);
  }

  double residual_norm(const Eigen::MatrixXd &Z) const {
    return (A_ * Z.reshaped() - y_).norm();
  }

private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd y_;
  Eigen::Index rows_, cols_;
  Eigen::LLT<Eigen::MatrixXd> gram_;
  bool use_gram_ = false;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd offset_;
};

/// Projection onto {Z : Z(omega) = observed}.
class EntryProjector {
public:
  EntryProjector(std::vector<EntryIndex> omega, Eigen::VectorXd observed)
      : omega_(std::move(omega)), observed_(std::move(observed)) {}

  Eigen::MatrixXd operator()(Eigen::MatrixXd Z) const {
    for (std::size_t i = 0; i < omega_.size(); ++i)
      Z(static_cast<Eigen::Index>(omega_[i].row), static_cast<Eigen::Index>(omega_[i].col)) =
          observed_(static_cast<Eigen::Index>(i));
    return Z;
  }

  double residual_norm(const Eigen::MatrixXd &Z) const {
    double s = 0;
    for (std::size_t i = 0; i < omega_.size(); ++i) {
      const double d = Z(static_cast<Eigen::Index>(omega_[i].row),
                         static_cast<Eigen::Index>(omega_[i].col)) -
                       observed_(static_cast<Eigen::Index>(i));
      s += d * d;
    }
    return std::sqrt(s);
  }

private:
  std::vector<EntryIndex> omega_;
  Eigen::VectorXd observed_;
};

template <class Projector>
RecoveredMatrix douglas_rachford(const Projector &project, Eigen::Index rows,
                                 Eigen::Index cols, double ynorm,
                                 const SolverConfig &cfg) {
  RecoveredMatrix out;
  if (ynorm == 0) {
    out.Z = Eigen::MatrixXd::Zero(rows, cols);
    out.converged = true;
    return out;
  }
  // minimum-norm feasible point sets the scale
  Eigen::MatrixXd V = project(Eigen::MatrixXd::Zero(rows, cols));
  const double scale = svd(V).S(0);
  double tau = cfg.penaltyPath.initial * scale;
  const double tau_floor = cfg.penaltyPath.floor * scale;

  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::MatrixXd best;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.maxIters; ++it) {
    Eigen::MatrixXd Znew = svt(V, tau);
    V += project(2.0 * Znew - V) - Znew;
    const double change = (Znew - Z).norm();
    const double zn = Znew.norm();
    Z = std::move(Znew);
    out.iterations = it;
    tau = std::max(tau * cfg.penaltyPath.decay, tau_floor);
    if (change <= cfg.relTol * std::max(zn, std::numeric_limits<double>::min())) {
      const double res = project.residual_norm(Z) / ynorm;
      if (res < cfg.feasTol) {
        out.converged = true;
        break;
      }
      if (res < best_res) {
        best_res = res;
        best = Z;
      }
    }
  }
  if (!out.converged && best.size() > 0 && project.residual_norm(Z) / ynorm > best_res)
    Z = std::move(best);

  const auto s = svd(Z);
  out.numericalRank = 0;
  while (out.numericalRank < s.S.size() && s.S(out.numericalRank) > cfg.rankTol * s.S(0))
    ++out.numericalRank;
  out.Z = truncate_rank(s, out.numericalRank);
  out.nuclearNorm = s.S.head(out.numericalRank).sum();
  out.residual = project.residual_norm(out.Z) / ynorm;
  out.converged = out.converged && out.residual < cfg.feasTol;
  return out;
}

} // namespace detail

/// Recover a low-rank matrix from affine measurements y = T(Z).
inline RecoveredMatrix recover_affine(const InnerOperator &inner, const Eigen::VectorXd &y,
                                      const SolverConfig &cfg = {}) {
  cfg.validate();
  validate_inner(inner);
  if (static_cast<std::size_t>(y.size()) != output_size(inner))
    throw ShapeError("observation length " + std::to_string(y.size()) +
                     " does not match operator output " + std::to_string(output_size(inner)));
  if (!y.allFinite())
    throw ArgumentError("observations must be finite");
  const auto rows = static_cast<Eigen::Index>(inner_rows(inner));
  const auto cols = static_cast<Eigen::Index>(inner_cols(inner));
  if (const auto *es = std::get_if<EntrySampling>(&inner))
    return detail::douglas_rachford(detail::EntryProjector(es->omega, y), rows, cols, y.norm(),
                                    cfg);
  return detail::douglas_rachford(detail::AffineProjector(inner_matrix(inner), y, rows, cols),
                                  rows, cols, y.norm(), cfg);
}

/// Low-rank completion of a rows x cols matrix from the entries at `omega`.
inline RecoveredMatrix recover_completion(const std::vector<EntryIndex> &omega,
                                          const Eigen::VectorXd &observed, std::size_t rows,
                                          std::size_t cols, const SolverConfig &cfg = {}) {
  cfg.validate();
  EntrySampling es{rows, cols, omega};
  validate_inner(es);
  if (static_cast<std::size_t>(observed.size()) != omega.size())
    throw ShapeError("need one observed value per sampled entry");
  if (!observed.allFinite())
    throw ArgumentError("observations must be finite");
  return detail::douglas_rachford(detail::EntryProjector(omega, observed),
                                  static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(cols), observed.norm(), cfg);
}

} // namespace trecs
