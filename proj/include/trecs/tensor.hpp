#pragma once

// Dense real tensors of arbitrary order, stored in one flat buffer with the
// last index varying fastest (row-major / C order):
//
//   offset(i_1, ..., i_K) = ((i_1 * n_2 + i_2) * n_3 + ...) * n_K + i_K
//
// Slices and contractions are taken over contiguous mode pairs (k, k+1) and
// always return freshly allocated Eigen matrices.

#include "error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace trecs {

using Dims = std::vector<std::size_t>;

namespace detail {

inline std::string dims_string(const Dims &d) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < d.size(); ++i)
    os << (i ? "," : "") << d[i];
  os << ')';
  return os.str();
}

/// Product of dims, throwing CapacityError when it cannot be addressed.
inline std::size_t checked_volume(const Dims &dims) {
  constexpr std::size_t limit =
      std::numeric_limits<std::ptrdiff_t>::max() / sizeof(double);
  std::size_t v = 1;
  for (auto n : dims) {
    if (n != 0 && v > limit / n)
      throw CapacityError("tensor with dims " + dims_string(dims) +
                          " exceeds addressable size");
    v *= n;
  }
  return v;
}

} // namespace detail

/// A pair of adjacent modes (first, first + 1), 0-based.
struct ModePair {
  std::size_t first = 0;
  std::size_t second = 1;

  friend bool operator==(const ModePair &, const ModePair &) = default;
};

inline ModePair mode_pair(std::size_t k) { return {k, k + 1}; }

inline void validate_mode_pair(ModePair p, std::size_t order) {
  if (p.second != p.first + 1)
    throw ArgumentError("only contiguous mode pairs (k, k+1) are supported, got (" +
                        std::to_string(p.first) + "," +
                        std::to_string(p.second) + ")");
  if (p.second >= order)
    throw ArgumentError("mode pair (" + std::to_string(p.first) + "," +
                        std::to_string(p.second) + ") invalid for order " +
                        std::to_string(order));
}

/// Dims left after removing the two modes of `p`.
inline Dims remaining_dims(const Dims &dims, ModePair p) {
  Dims out;
  out.reserve(dims.size() >= 2 ? dims.size() - 2 : 0);
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (i != p.first && i != p.second)
      out.push_back(dims[i]);
  return out;
}

class DenseTensor {
public:
  DenseTensor() = default;

  /// All-zeros tensor.
  explicit DenseTensor(Dims dims) : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(detail::checked_volume(dims_), 0.0);
  }

  DenseTensor(Dims dims, std::vector<double> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != detail::checked_volume(dims_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + detail::dims_string(dims_));
    for (double x : data_)
      if (!std::isfinite(x))
        throw ArgumentError("tensor entries must be finite");
  }

  static DenseTensor from_vector(const Eigen::VectorXd &v) {
    return DenseTensor({static_cast<std::size_t>(v.size())},
                       std::vector<double>(v.data(), v.data() + v.size()));
  }

  /// Order-2 tensor with entry (i, j) = m(i, j).
  static DenseTensor from_matrix(const Eigen::MatrixXd &m) {
    std::vector<double> d(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>(d.data(), m.rows(), m.cols()) = m;
    return DenseTensor({static_cast<std::size_t>(m.rows()),
                        static_cast<std::size_t>(m.cols())},
                       std::move(d));
  }

  const Dims &dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }

  Eigen::Map<const Eigen::VectorXd> as_vector() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    if (idx.size() != dims_.size())
      throw ShapeError("index of length " + std::to_string(idx.size()) +
                       " for order-" + std::to_string(dims_.size()) + " tensor");
    std::size_t off = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
      if (idx[k] >= dims_[k])
        throw BoundsError("index " + std::to_string(idx[k]) + " out of range for mode " +
                          std::to_string(k) + " of size " + std::to_string(dims_[k]));
      off = off * dims_[k] + idx[k];
    }
    return off;
  }

  double operator()(std::span<const std::size_t> idx) const {
    return data_[linear_index(idx)];
  }
  double operator()(std::initializer_list<std::size_t> idx) const {
    return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  DenseTensor operator+(const DenseTensor &o) const { return combine(o, 1.0, 1.0); }
  DenseTensor operator-(const DenseTensor &o) const { return combine(o, 1.0, -1.0); }
  DenseTensor operator*(double s) const {
    std::vector<double> d(data_);
    for (double &x : d)
      x *= s;
    return {dims_, std::move(d)};
  }
  friend DenseTensor operator*(double s, const DenseTensor &t) { return t * s; }

  /// a*this + b*o
  DenseTensor combine(const DenseTensor &o, double a, double b) const {
    if (o.dims_ != dims_)
      throw ShapeError("dims mismatch " + detail::dims_string(dims_) + " vs " +
                       detail::dims_string(o.dims_));
    std::vector<double> d(data_.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = a * data_[i] + b * o.data_[i];
    return {dims_, std::move(d)};
  }

private:
  void validate_dims() const {
    if (dims_.empty())
      throw ShapeError("tensor must have order >= 1");
    for (auto n : dims_)
      if (n == 0)
        throw ShapeError("tensor dims must be positive, got " +
                         detail::dims_string(dims_));
  }

  Dims dims_;
  std::vector<double> data_;
};

/// Identifies one slice: the mode pair left free and the frozen coordinates
/// of every other mode, in increasing mode order.
struct SliceIndex {
  ModePair modes;
  std::vector<std::size_t> fixed;

  friend bool operator==(const SliceIndex &, const SliceIndex &) = default;
};

inline void validate_slice(const SliceIndex &s, const Dims &dims) {
  validate_mode_pair(s.modes, dims.size());
  const Dims rest = remaining_dims(dims, s.modes);
  if (s.fixed.size() != rest.size())
    throw ShapeError("slice index needs " + std::to_string(rest.size()) +
                     " fixed coordinates, got " + std::to_string(s.fixed.size()));
  for (std::size_t i = 0; i < rest.size(); ++i)
    if (s.fixed[i] >= rest[i])
      throw BoundsError("slice coordinate " + std::to_string(s.fixed[i]) +
                        " out of range " + std::to_string(rest[i]));
}

namespace detail {

// Strides for viewing a tensor as (outer, n_k, n_{k+1}, inner).
struct PairLayout {
  std::size_t outer = 1, rows = 0, cols = 0, inner = 1;
};

inline PairLayout pair_layout(const Dims &dims, ModePair p) {
  PairLayout l;
  for (std::size_t i = 0; i < p.first; ++i)
    l.outer *= dims[i];
  l.rows = dims[p.first];
  l.cols = dims[p.second];
  for (std::size_t i = p.second + 1; i < dims.size(); ++i)
    l.inner *= dims[i];
  return l;
}

} // namespace detail

inline double inner_product(const DenseTensor &a, const DenseTensor &b) {
  if (a.dims() != b.dims())
    throw ShapeError("inner product of tensors with dims " +
                     detail::dims_string(a.dims()) + " and " +
                     detail::dims_string(b.dims()));
  return a.as_vector().dot(b.as_vector());
}

inline double frobenius_norm(const DenseTensor &t) { return t.as_vector().norm(); }

inline Eigen::MatrixXd slice(const DenseTensor &t, const SliceIndex &s) {
  validate_slice(s, t.dims());
  const auto l = detail::pair_layout(t.dims(), s.modes);
  // fixed coordinates split into the modes before and after the pair
  std::size_t o = 0, q = 0;
  for (std::size_t i = 0; i < s.modes.first; ++i)
    o = o * t.dims()[i] + s.fixed[i];
  for (std::size_t i = s.modes.first; i < s.fixed.size(); ++i)
    q = q * t.dims()[i + 2] + s.fixed[i];

  Eigen::MatrixXd out(l.rows, l.cols);
  const auto d = t.data();
  for (std::size_t a = 0; a < l.rows; ++a)
    for (std::size_t b = 0; b < l.cols; ++b)
      out(a, b) = d[((o * l.rows + a) * l.cols + b) * l.inner + q];
  return out;
}

/// Weighted sum of all slices over `pair`; the weight tensor is indexed by
/// the remaining modes in increasing order.
inline Eigen::MatrixXd contract(const DenseTensor &t, ModePair pair,
                                const DenseTensor &weight) {
  if (t.order() < 3)
    throw ShapeError("contraction needs a tensor of order >= 3");
  validate_mode_pair(pair, t.order());
  const Dims wdims = remaining_dims(t.dims(), pair);
  if (weight.dims() != wdims)
    throw ShapeError("contraction weight dims " + detail::dims_string(weight.dims()) +
                     " do not match expected " + detail::dims_string(wdims));
  const auto l = detail::pair_layout(t.dims(), pair);
  const auto d = t.data();
  const auto w = weight.data();

  // Accumulate in row-major order so the inner loop is contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> acc =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(
          l.rows, l.cols);
  double *out = acc.data();
  const std::size_t block = l.rows * l.cols;
  for (std::size_t o = 0; o < l.outer; ++o) {
    const double *src = d.data() + o * block * l.inner;
    const double *wo = w.data() + o * l.inner;
    for (std::size_t ab = 0; ab < block; ++ab) {
      const double *e = src + ab * l.inner;
      double s = 0.0;
      for (std::size_t q = 0; q < l.inner; ++q)
        s += wo[q] * e[q];
      out[ab] += s;
    }
  }
  return acc;
}

/// Coordinate basis tensor e_S over the modes not in `s.modes`.
inline DenseTensor coordinate_weight(const Dims &dims, const SliceIndex &s) {
  validate_slice(s, dims);
  const Dims wdims = remaining_dims(dims, s.modes);
  DenseTensor zero(wdims);
  std::vector<double> d(zero.data().begin(), zero.data().end());
  std::size_t off = 0;
  for (std::size_t i = 0; i < wdims.size(); ++i)
    off = off * wdims[i] + s.fixed[i];
  d[off] = 1.0;
  return {wdims, std::move(d)};
}

/// Outer product of tensors; the result's modes are the parts' modes in order.
inline DenseTensor outer_tensor(std::span<const DenseTensor> parts) {
  if (parts.empty())
    throw ArgumentError("outer product of an empty list");
  Dims dims;
  for (const auto &p : parts)
    dims.insert(dims.end(), p.dims().begin(), p.dims().end());
  detail::checked_volume(dims);

  std::vector<double> cur(parts[0].data().begin(), parts[0].data().end());
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto next = parts[k].data();
    std::vector<double> grown;
    grown.reserve(cur.size() * next.size());
    for (double x : cur)
      for (double y : next)
        grown.push_back(x * y);
    cur = std::move(grown);
  }
  return {std::move(dims), std::move(cur)};
}

inline DenseTensor outer_tensor(std::initializer_list<DenseTensor> parts) {
  return outer_tensor(std::span<const DenseTensor>(parts.begin(), parts.size()));
}

} // namespace trecs
