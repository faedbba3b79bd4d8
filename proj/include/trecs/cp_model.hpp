#pragma once

#include "error.hpp"
#include "random.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace trecs {

/// Rank-r Kruskal model  X = sum_l weights(l) * factor_1(:,l) o ... o factor_K(:,l).
///
/// The constructor brings the model into canonical form: unit-norm columns,
/// the largest-magnitude entry of each column nonnegative (ties go to the
/// lowest row), and components ordered by decreasing |weight| with the
/// original index as tie-break. Scale and sign are pushed into the weights.
class CPModel {
public:
  CPModel() = default;

  CPModel(std::vector<Eigen::MatrixXd> factors, Eigen::VectorXd weights)
      : factors_(std::move(factors)), weights_(std::move(weights)) {
    validate();
    canonicalize();
  }

  std::size_t order() const noexcept { return factors_.size(); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  const std::vector<Eigen::MatrixXd> &factors() const noexcept { return factors_; }
  const Eigen::MatrixXd &factor(std::size_t k) const { return factors_.at(k); }
  const Eigen::VectorXd &weights() const noexcept { return weights_; }

  Dims dims() const {
    Dims d;
    for (const auto &f : factors_)
      d.push_back(static_cast<std::size_t>(f.rows()));
    return d;
  }

private:
  void validate() const {
    if (factors_.size() < 2)
      throw ShapeError("CP model needs at least two factor matrices");
    const auto r = weights_.size();
    Eigen::Index min_dim = factors_.front().rows();
    for (const auto &f : factors_) {
      if (f.cols() != r)
        throw ShapeError("factor has " + std::to_string(f.cols()) +
                         " columns, expected rank " + std::to_string(r));
      if (f.rows() == 0)
        throw ShapeError("factor matrices need at least one row");
      if (!f.allFinite())
        throw ArgumentError("factor entries must be finite");
      min_dim = std::min(min_dim, f.rows());
    }
    if (!weights_.allFinite())
      throw ArgumentError("weights must be finite");
    if (r > min_dim)
      throw ArgumentError("rank " + std::to_string(r) +
                          " exceeds the smallest dimension " + std::to_string(min_dim));
  }

  void canonicalize() {
    const Eigen::Index r = weights_.size();
    for (auto &f : factors_) {
      for (Eigen::Index l = 0; l < r; ++l) {
        const double nrm = f.col(l).norm();
        if (nrm == 0.0)
          throw ArgumentError("factor column " + std::to_string(l) + " is zero");
        // already-unit columns are left bit-for-bit alone so canonicalization
        // is idempotent
        if (std::abs(nrm - 1.0) > 4 * std::numeric_limits<double>::epsilon()) {
          f.col(l) /= nrm;
          weights_(l) *= nrm;
        }
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
          // strict comparison with a relative margin keeps ties on the lowest row
          if (std::abs(f(i, l)) > best * (1.0 + 1e-12)) {
            best = std::abs(f(i, l));
            arg = i;
          }
        }
        if (f(arg, l) < 0.0) {
          f.col(l) = -f.col(l);
          weights_(l) = -weights_(l);
        }
      }
    }
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(weights_(a)) > std::abs(weights_(b));
    });
    Eigen::VectorXd w(r);
    for (Eigen::Index j = 0; j < r; ++j)
      w(j) = weights_(perm[static_cast<std::size_t>(j)]);
    weights_ = std::move(w);
    for (auto &f : factors_) {
      Eigen::MatrixXd g(f.rows(), r);
      for (Eigen::Index j = 0; j < r; ++j)
        g.col(j) = f.col(perm[static_cast<std::size_t>(j)]);
      f = std::move(g);
    }
  }

  std::vector<Eigen::MatrixXd> factors_;
  Eigen::VectorXd weights_;
};

/// Rank-one tensor  v_1 o v_2 o ... o v_K.
inline DenseTensor rank_one(std::span<const Eigen::VectorXd> vecs) {
  std::vector<DenseTensor> parts;
  parts.reserve(vecs.size());
  for (const auto &v : vecs)
    parts.push_back(DenseTensor::from_vector(v));
  return outer_tensor(parts);
}

inline DenseTensor cp_component(const CPModel &m, std::size_t l) {
  std::vector<Eigen::VectorXd> cols;
  for (const auto &f : m.factors())
    cols.emplace_back(f.col(static_cast<Eigen::Index>(l)));
  return rank_one(cols);
}

/// Dense tensor represented by the model.
inline DenseTensor cp_evaluate(const CPModel &m) {
  const Dims dims = m.dims();
  const std::size_t total = detail::checked_volume(dims);
  const std::size_t K = m.order();
  std::vector<double> out(total, 0.0);
  // Sweep entries in layout order; the partial products for the leading
  // modes are cached so each entry costs O(r).
  const Eigen::Index r = static_cast<Eigen::Index>(m.rank());
  if (r == 0)
    return {dims, std::move(out)};
  std::vector<Eigen::VectorXd> prefix(K);
  prefix[0] = m.weights();
  std::vector<std::size_t> idx(K, 0);
  auto refresh = [&](std::size_t from) {
    for (std::size_t k = from; k + 1 < K; ++k) {
      const Eigen::VectorXd &prev = prefix[k];
      prefix[k + 1] = prev.cwiseProduct(
          m.factor(k).row(static_cast<Eigen::Index>(idx[k])).transpose());
    }
  };
  refresh(0);
  const Eigen::MatrixXd &last = m.factor(K - 1);
  for (std::size_t off = 0; off < total; ++off) {
    out[off] = last.row(static_cast<Eigen::Index>(idx[K - 1])).dot(prefix[K - 1]);
    // advance the multi-index
    std::size_t k = K;
    while (k-- > 0) {
      if (++idx[k] < dims[k])
        break;
      idx[k] = 0;
    }
    if (k < K - 1 && off + 1 < total)
      refresh(k);
  }
  return {dims, std::move(out)};
}

/// Model with i.i.d. standard normal factor entries and unit weights,
/// canonicalized on construction.
inline CPModel random_cp_model(const Dims &dims, std::size_t rank, Rng &rng) {
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims)
    factors.push_back(random_normal(static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(rank), rng));
  return {std::move(factors), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rank))};
}

/// Relative Frobenius distance ||a - b|| / ||b||.
inline double relative_error(const DenseTensor &a, const DenseTensor &b) {
  const double nb = frobenius_norm(b);
  const double diff = (a.as_vector() - b.as_vector()).norm();
  return nb > 0 ? diff / nb : diff;
}

} // namespace trecs
