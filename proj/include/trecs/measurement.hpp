#pragma once

// Separable measurement operators.
//
// A separable operator L with respect to mode pair (k, k+1) is a weight
// tensor W over the remaining modes together with an inner operator T acting
// on n_k x n_{k+1} matrices:
//
//   L(X) = sum_S W_S T(X_S) = T(contract(X, (k, k+1), W)).
//
// Completion operators use a coordinate weight, stored as the SliceIndex it
// selects rather than as a materialized basis tensor.

#include "error.hpp"
#include "io.hpp"
#include "random.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace trecs {

/// T(Z)_i = <Gamma_i, Z>. Row i of `sensing` holds Gamma_i flattened
/// column-major (entry (a, b) at a + b * rows).
struct GaussianProjection {
  std::size_t rows = 0, cols = 0;
  std::shared_ptr<const Eigen::MatrixXd> sensing;

  std::size_t count() const { return static_cast<std::size_t>(sensing->rows()); }
  Eigen::MatrixXd gamma(std::size_t i) const {
    return sensing->row(static_cast<Eigen::Index>(i))
        .reshaped(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
};

struct EntryIndex {
  std::size_t row = 0, col = 0;
  friend bool operator==(const EntryIndex &, const EntryIndex &) = default;
  friend auto operator<=>(const EntryIndex &, const EntryIndex &) = default;
};

/// T(Z) = (Z(omega_0), Z(omega_1), ...).
struct EntrySampling {
  std::size_t rows = 0, cols = 0;
  std::vector<EntryIndex> omega;

  std::size_t count() const { return omega.size(); }
};

/// T(Z)_i = left(:,i)^T Z right(:,i).
struct RankOneProjection {
  Eigen::MatrixXd left;  // rows x m
  Eigen::MatrixXd right; // cols x m

  std::size_t count() const { return static_cast<std::size_t>(left.cols()); }
};

/// T(Z) = A Z B^T flattened row-major (entry (q, s) at q * m2 + s).
struct Sketch {
  Eigen::MatrixXd A; // m1 x rows
  Eigen::MatrixXd B; // m2 x cols

  std::size_t count() const { return static_cast<std::size_t>(A.rows() * B.rows()); }
};

using InnerOperator = std::variant<GaussianProjection, EntrySampling, RankOneProjection, Sketch>;

inline std::size_t inner_rows(const InnerOperator &op) {
  return std::visit(
      [](const auto &o) -> std::size_t {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, RankOneProjection>)
          return static_cast<std::size_t>(o.left.rows());
        else if constexpr (std::is_same_v<T, Sketch>)
          return static_cast<std::size_t>(o.A.cols());
        else
          return o.rows;
      },
      op);
}

inline std::size_t inner_cols(const InnerOperator &op) {
  return std::visit(
      [](const auto &o) -> std::size_t {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, RankOneProjection>)
          return static_cast<std::size_t>(o.right.rows());
        else if constexpr (std::is_same_v<T, Sketch>)
          return static_cast<std::size_t>(o.B.cols());
        else
          return o.cols;
      },
      op);
}

inline std::size_t output_size(const InnerOperator &op) {
  return std::visit([](const auto &o) { return o.count(); }, op);
}

inline void validate_inner(const InnerOperator &op) {
  std::visit(
      [](const auto &o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GaussianProjection>) {
          if (!o.sensing)
            throw ArgumentError("gaussian projection without sensing matrix");
          if (static_cast<std::size_t>(o.sensing->cols()) != o.rows * o.cols)
            throw ShapeError("gaussian projection width does not match rows*cols");
        } else if constexpr (std::is_same_v<T, EntrySampling>) {
          std::vector<EntryIndex> sorted = o.omega;
          std::sort(sorted.begin(), sorted.end());
          if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ArgumentError("entry sampling indices must be unique");
          for (const auto &e : o.omega)
            if (e.row >= o.rows || e.col >= o.cols)
              throw BoundsError("entry (" + std::to_string(e.row) + "," +
                                std::to_string(e.col) + ") outside " +
                                std::to_string(o.rows) + "x" + std::to_string(o.cols));
        } else if constexpr (std::is_same_v<T, RankOneProjection>) {
          if (o.left.cols() != o.right.cols())
            throw ShapeError("rank-one projection needs as many right as left vectors");
        }
      },
      op);
}

inline void check_domain(const InnerOperator &op, const Eigen::MatrixXd &Z) {
  if (static_cast<std::size_t>(Z.rows()) != inner_rows(op) ||
      static_cast<std::size_t>(Z.cols()) != inner_cols(op))
    throw ShapeError("inner operator expects " + std::to_string(inner_rows(op)) + "x" +
                     std::to_string(inner_cols(op)) + " input, got " +
                     std::to_string(Z.rows()) + "x" + std::to_string(Z.cols()));
}

inline Eigen::VectorXd apply_inner(const InnerOperator &op, const Eigen::MatrixXd &Z) {
  check_domain(op, Z);
  return std::visit(
      [&](const auto &o) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GaussianProjection>) {
          return *o.sensing * Z.reshaped();
        } else if constexpr (std::is_same_v<T, EntrySampling>) {
          Eigen::VectorXd y(static_cast<Eigen::Index>(o.omega.size()));
          for (std::size_t i = 0; i < o.omega.size(); ++i)
            y(static_cast<Eigen::Index>(i)) = Z(static_cast<Eigen::Index>(o.omega[i].row),
                                                static_cast<Eigen::Index>(o.omega[i].col));
          return y;
        } else if constexpr (std::is_same_v<T, RankOneProjection>) {
          const Eigen::MatrixXd zr = Z * o.right;
          return o.left.cwiseProduct(zr).colwise().sum().transpose();
        } else {
          const Eigen::MatrixXd Y = o.A * Z * o.B.transpose();
          return Y.transpose().reshaped();
        }
      },
      op);
}

inline Eigen::MatrixXd adjoint_inner(const InnerOperator &op, const Eigen::VectorXd &y) {
  if (static_cast<std::size_t>(y.size()) != output_size(op))
    throw ShapeError("adjoint expects a vector of length " + std::to_string(output_size(op)) +
                     ", got " + std::to_string(y.size()));
  const auto rows = static_cast<Eigen::Index>(inner_rows(op));
  const auto cols = static_cast<Eigen::Index>(inner_cols(op));
  return std::visit(
      [&](const auto &o) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GaussianProjection>) {
          return (o.sensing->transpose() * y).reshaped(rows, cols);
        } else if constexpr (std::is_same_v<T, EntrySampling>) {
          Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(rows, cols);
          for (std::size_t i = 0; i < o.omega.size(); ++i)
            Z(static_cast<Eigen::Index>(o.omega[i].row),
              static_cast<Eigen::Index>(o.omega[i].col)) = y(static_cast<Eigen::Index>(i));
          return Z;
        } else if constexpr (std::is_same_v<T, RankOneProjection>) {
          return o.left * y.asDiagonal() * o.right.transpose();
        } else {
          const Eigen::MatrixXd Y = y.reshaped(o.B.rows(), o.A.rows()).transpose();
          return o.A.transpose() * Y * o.B;
        }
      },
      op);
}

/// Matrix of T acting on column-major vec(Z): output_size x (rows * cols).
inline Eigen::MatrixXd inner_matrix(const InnerOperator &op) {
  if (const auto *g = std::get_if<GaussianProjection>(&op))
    return *g->sensing;
  const auto rows = static_cast<Eigen::Index>(inner_rows(op));
  const auto cols = static_cast<Eigen::Index>(inner_cols(op));
  Eigen::MatrixXd M(static_cast<Eigen::Index>(output_size(op)), rows * cols);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index j = 0; j < rows * cols; ++j) {
    E(j % rows, j / rows) = 1.0;
    M.col(j) = apply_inner(op, E);
    E(j % rows, j / rows) = 0.0;
  }
  return M;
}

inline const char *inner_kind(const InnerOperator &op) {
  static constexpr const char *names[] = {"gaussian", "entries", "rankone", "sketch"};
  return names[op.index()];
}

/// Dense weight tensor or the slice selected by a coordinate weight.
using Weight = std::variant<DenseTensor, SliceIndex>;

class SeparableOperator {
public:
  SeparableOperator(Dims dims, std::size_t mode, Weight weight, InnerOperator inner)
      : dims_(std::move(dims)), mode_(mode), weight_(std::move(weight)),
        inner_(std::move(inner)) {
    if (dims_.size() < 3)
      throw ShapeError("separable operators need a tensor of order >= 3");
    validate_mode_pair(mode_pair(mode_), dims_.size());
    if (const auto *w = std::get_if<DenseTensor>(&weight_)) {
      if (w->dims() != remaining_dims(dims_, mode_pair(mode_)))
        throw ShapeError("weight dims " + detail::dims_string(w->dims()) +
                         " incompatible with mode " + std::to_string(mode_) + " of " +
                         detail::dims_string(dims_));
    } else {
      const auto &s = std::get<SliceIndex>(weight_);
      if (s.modes != mode_pair(mode_))
        throw ArgumentError("slice weight belongs to a different mode pair");
      validate_slice(s, dims_);
    }
    validate_inner(inner_);
    if (inner_rows(inner_) != dims_[mode_] || inner_cols(inner_) != dims_[mode_ + 1])
      throw ShapeError("inner operator domain does not match mode pair dimensions");
  }

  const Dims &dims() const noexcept { return dims_; }
  /// Index k of the mode pair (k, k+1).
  std::size_t mode() const noexcept { return mode_; }
  const Weight &weight() const noexcept { return weight_; }
  const InnerOperator &inner() const noexcept { return inner_; }
  std::size_t sample_count() const { return output_size(inner_); }

  /// Materialized weight tensor (the coordinate tensor for slice weights).
  DenseTensor weight_tensor() const {
    if (const auto *w = std::get_if<DenseTensor>(&weight_))
      return *w;
    return coordinate_weight(dims_, std::get<SliceIndex>(weight_));
  }

  /// The matrix T sees: contract(X, (k, k+1), W).
  Eigen::MatrixXd contraction(const DenseTensor &X) const {
    if (X.dims() != dims_)
      throw ShapeError("operator built for dims " + detail::dims_string(dims_) +
                       " applied to " + detail::dims_string(X.dims()));
    if (const auto *w = std::get_if<DenseTensor>(&weight_))
      return contract(X, mode_pair(mode_), *w);
    return slice(X, std::get<SliceIndex>(weight_));
  }

private:
  Dims dims_;
  std::size_t mode_;
  Weight weight_;
  InnerOperator inner_;
};

inline Eigen::VectorXd apply_tensor(const SeparableOperator &op, const DenseTensor &X) {
  return apply_inner(op.inner(), op.contraction(X));
}

struct MeasurementGroup {
  SeparableOperator op;
  Eigen::VectorXd y;
};

/// The two weight groups observed for one mode pair.
struct ModeMeasurements {
  std::size_t mode = 0;
  std::array<MeasurementGroup, 2> groups;
};

struct MeasurementSet {
  Dims sourceDims;
  std::vector<ModeMeasurements> modes;

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const auto &m : modes)
      for (const auto &g : m.groups)
        n += static_cast<std::size_t>(g.y.size());
    return n;
  }
};

inline void validate_measurement_set(const MeasurementSet &ms) {
  for (const auto &m : ms.modes)
    for (const auto &g : m.groups) {
      if (g.op.dims() != ms.sourceDims)
        throw ShapeError("measurement group built for different tensor dims");
      if (g.op.mode() != m.mode)
        throw ArgumentError("measurement group mode does not match its entry");
      if (static_cast<std::size_t>(g.y.size()) != g.op.sample_count())
        throw ShapeError("observed vector length " + std::to_string(g.y.size()) +
                         " does not match operator output " +
                         std::to_string(g.op.sample_count()));
    }
}

/// Operators without observations; `measure` applies them to a tensor.
struct MeasurementDesign {
  Dims dims;
  struct Mode {
    std::size_t mode;
    std::array<SeparableOperator, 2> ops;
  };
  std::vector<Mode> modes;

  MeasurementSet measure(const DenseTensor &X) const {
    if (X.dims() != dims)
      throw ShapeError("design for dims " + detail::dims_string(dims) + " applied to " +
                       detail::dims_string(X.dims()));
    MeasurementSet ms{dims, {}};
    for (const auto &m : modes)
      ms.modes.push_back({m.mode,
                          {MeasurementGroup{m.ops[0], apply_tensor(m.ops[0], X)},
                           MeasurementGroup{m.ops[1], apply_tensor(m.ops[1], X)}}});
    return ms;
  }
};

namespace detail {

inline void check_design_dims(const Dims &dims) {
  if (dims.size() < 3)
    throw ShapeError("measurement designs need a tensor of order >= 3");
  for (auto n : dims)
    if (n == 0)
      throw ShapeError("dims must be positive");
}

inline DenseTensor random_unit_weight(const Dims &wdims, Rng &rng) {
  const auto v = random_normal(static_cast<Eigen::Index>(checked_volume(wdims)), rng);
  const Eigen::VectorXd u = v / v.norm();
  return {wdims, std::vector<double>(u.data(), u.data() + u.size())};
}

/// Both unit weights for every mode pair, drawn first and in mode order.
inline std::vector<std::array<DenseTensor, 2>> draw_weights(const Dims &dims, Rng &rng) {
  std::vector<std::array<DenseTensor, 2>> w;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const Dims wd = remaining_dims(dims, mode_pair(k));
    auto a = random_unit_weight(wd, rng);
    auto b = random_unit_weight(wd, rng);
    w.push_back({std::move(a), std::move(b)});
  }
  return w;
}

inline void check_counts(const std::vector<std::size_t> &counts, const Dims &dims) {
  if (counts.size() != dims.size() - 1)
    throw ShapeError("need one sample count per mode pair (" +
                     std::to_string(dims.size() - 1) + "), got " +
                     std::to_string(counts.size()));
}

} // namespace detail

/// Random-projection design. For each mode pair k, m_k Gaussian matrices are
/// shared by two groups whose weights are independent unit vectors/tensors.
/// Random draws: every weight (mode order, group 1 then 2), then the
/// Gaussian matrices mode by mode.
inline MeasurementDesign make_gaussian_projection_set(const Dims &dims,
                                                      const std::vector<std::size_t> &mPerMode,
                                                      std::uint64_t seed) {
  detail::check_design_dims(dims);
  detail::check_counts(mPerMode, dims);
  Rng rng(seed);
  auto weights = detail::draw_weights(dims, rng);
  MeasurementDesign d{dims, {}};
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto rows = dims[k], cols = dims[k + 1];
    auto sensing = std::make_shared<const Eigen::MatrixXd>(
        random_normal(static_cast<Eigen::Index>(mPerMode[k]),
                      static_cast<Eigen::Index>(rows * cols), rng));
    GaussianProjection g{rows, cols, sensing};
    d.modes.push_back({k,
                       {SeparableOperator(dims, k, std::move(weights[k][0]), g),
                        SeparableOperator(dims, k, std::move(weights[k][1]), g)}});
  }
  return d;
}

/// Rank-one projection design: fresh Gaussian (a_i, b_i) for every
/// measurement, shared by both weight groups of a mode pair.
inline MeasurementDesign make_rank_one_projection_set(const Dims &dims,
                                                      const std::vector<std::size_t> &mPerMode,
                                                      std::uint64_t seed) {
  detail::check_design_dims(dims);
  detail::check_counts(mPerMode, dims);
  Rng rng(seed);
  auto weights = detail::draw_weights(dims, rng);
  MeasurementDesign d{dims, {}};
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto m = static_cast<Eigen::Index>(mPerMode[k]);
    RankOneProjection op{random_normal(static_cast<Eigen::Index>(dims[k]), m, rng),
                         random_normal(static_cast<Eigen::Index>(dims[k + 1]), m, rng)};
    d.modes.push_back({k,
                       {SeparableOperator(dims, k, std::move(weights[k][0]), op),
                        SeparableOperator(dims, k, std::move(weights[k][1]), op)}});
  }
  return d;
}

/// Sketching design: Gaussian A (m1 x n_k), B (m2 x n_{k+1}) per mode pair.
inline MeasurementDesign make_sketch_set(const Dims &dims,
                                         const std::vector<std::pair<std::size_t, std::size_t>> &sketchSizes,
                                         std::uint64_t seed) {
  detail::check_design_dims(dims);
  if (sketchSizes.size() != dims.size() - 1)
    throw ShapeError("need one sketch size per mode pair");
  Rng rng(seed);
  auto weights = detail::draw_weights(dims, rng);
  MeasurementDesign d{dims, {}};
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Sketch op{random_normal(static_cast<Eigen::Index>(sketchSizes[k].first),
                            static_cast<Eigen::Index>(dims[k]), rng),
              random_normal(static_cast<Eigen::Index>(sketchSizes[k].second),
                            static_cast<Eigen::Index>(dims[k + 1]), rng)};
    d.modes.push_back({k,
                       {SeparableOperator(dims, k, std::move(weights[k][0]), op),
                        SeparableOperator(dims, k, std::move(weights[k][1]), op)}});
  }
  return d;
}

/// Two distinct slices per mode pair: all fixed coordinates zero, and the
/// same with the first non-trivial coordinate set to one.
inline std::vector<std::array<SliceIndex, 2>> default_slice_pairs(const Dims &dims) {
  detail::check_design_dims(dims);
  std::vector<std::array<SliceIndex, 2>> out;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const Dims rest = remaining_dims(dims, mode_pair(k));
    SliceIndex a{mode_pair(k), std::vector<std::size_t>(rest.size(), 0)};
    SliceIndex b = a;
    const auto it = std::find_if(rest.begin(), rest.end(), [](std::size_t n) { return n > 1; });
    if (it == rest.end())
      throw ArgumentError("mode pair " + std::to_string(k) + " has only one slice");
    b.fixed[static_cast<std::size_t>(it - rest.begin())] = 1;
    out.push_back({std::move(a), std::move(b)});
  }
  return out;
}

/// Slice-restricted completion design: for each designated slice, draw
/// `mPerSlice` entries uniformly without replacement. Indices are stored
/// sorted. Slices are processed in mode order, group 1 then 2.
inline MeasurementDesign make_slice_sampling_set(const Dims &dims,
                                                 const std::vector<std::array<SliceIndex, 2>> &slicePairs,
                                                 std::size_t mPerSlice, std::uint64_t seed) {
  detail::check_design_dims(dims);
  if (slicePairs.size() != dims.size() - 1)
    throw ShapeError("need two slices for each of the " + std::to_string(dims.size() - 1) +
                     " mode pairs");
  Rng rng(seed);
  MeasurementDesign d{dims, {}};
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const auto &pair = slicePairs[k];
    if (pair[0] == pair[1])
      throw ArgumentError("the two slices of mode pair " + std::to_string(k) +
                          " must be distinct");
    const std::size_t rows = dims[k], cols = dims[k + 1];
    if (mPerSlice > rows * cols)
      throw ArgumentError("requested " + std::to_string(mPerSlice) +
                          " samples from a slice of size " + std::to_string(rows * cols));
    std::vector<SeparableOperator> ops;
    for (const auto &s : pair) {
      if (s.modes != mode_pair(k))
        throw ArgumentError("slice listed under mode pair " + std::to_string(k) +
                            " belongs to another pair");
      std::vector<std::size_t> cells(rows * cols);
      std::iota(cells.begin(), cells.end(), std::size_t{0});
      // partial Fisher-Yates
      for (std::size_t i = 0; i < mPerSlice; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
        std::swap(cells[i], cells[pick(rng)]);
      }
      cells.resize(mPerSlice);
      std::sort(cells.begin(), cells.end());
      EntrySampling es{rows, cols, {}};
      for (auto c : cells)
        es.omega.push_back({c / cols, c % cols});
      ops.emplace_back(dims, k, s, std::move(es));
    }
    d.modes.push_back({k, {std::move(ops[0]), std::move(ops[1])}});
  }
  return d;
}

// ---------------------------------------------------------------------------
// MSET v1
//
//   MSET 1 <K> <n_1> ... <n_K>
//   MODES <count>
//   then per mode pair:
//     MODE <k>
//     and per group g in {1, 2}:
//       GROUP <g>
//       WEIGHT DENSE            followed by an embedded DTNS v1 block
//     | WEIGHT SLICE <c_1> ... <c_{K-2}>
//       INNER GAUSSIAN <m> <rows> <cols>   m blocks of `rows` lines
//     | INNER ENTRIES <m> <rows> <cols>    m lines "<row> <col>"
//     | INNER RANKONE <m> <rows> <cols>    m lines: a_i values then b_i values
//     | INNER SKETCH <m1> <m2> <rows> <cols>  A rows then B rows
//     | INNER SAME                         group 2 only: reuse group 1's operator
//       Y <len>
//       <len values>
//
// Mode pair indices and entry coordinates are 0-based.

inline bool same_inner(const InnerOperator &a, const InnerOperator &b) {
  if (a.index() != b.index())
    return false;
  if (const auto *ga = std::get_if<GaussianProjection>(&a)) {
    const auto &gb = std::get<GaussianProjection>(b);
    if (ga->sensing == gb.sensing)
      return ga->rows == gb.rows && ga->cols == gb.cols;
    return ga->sensing && gb.sensing && ga->rows == gb.rows && ga->cols == gb.cols &&
           ga->sensing->rows() == gb.sensing->rows() &&
           ga->sensing->cols() == gb.sensing->cols() && *ga->sensing == *gb.sensing;
  }
  if (const auto *ea = std::get_if<EntrySampling>(&a)) {
    const auto &eb = std::get<EntrySampling>(b);
    return ea->rows == eb.rows && ea->cols == eb.cols && ea->omega == eb.omega;
  }
  if (const auto *ra = std::get_if<RankOneProjection>(&a)) {
    const auto &rb = std::get<RankOneProjection>(b);
    return ra->left.rows() == rb.left.rows() && ra->left.cols() == rb.left.cols() &&
           ra->right.rows() == rb.right.rows() && ra->left == rb.left && ra->right == rb.right;
  }
  const auto &sa = std::get<Sketch>(a);
  const auto &sb = std::get<Sketch>(b);
  return sa.A.rows() == sb.A.rows() && sa.A.cols() == sb.A.cols() &&
         sa.B.rows() == sb.B.rows() && sa.B.cols() == sb.B.cols() && sa.A == sb.A &&
         sa.B == sb.B;
}

namespace detail {

inline void write_inner(std::ostream &os, const InnerOperator &op) {
  std::visit(
      [&](const auto &o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, GaussianProjection>) {
          os << "INNER GAUSSIAN " << o.count() << ' ' << o.rows << ' ' << o.cols << '\n';
          for (std::size_t i = 0; i < o.count(); ++i)
            write_matrix_rows(os, o.gamma(i));
        } else if constexpr (std::is_same_v<T, EntrySampling>) {
          os << "INNER ENTRIES " << o.count() << ' ' << o.rows << ' ' << o.cols << '\n';
          for (const auto &e : o.omega)
            os << e.row << ' ' << e.col << '\n';
        } else if constexpr (std::is_same_v<T, RankOneProjection>) {
          os << "INNER RANKONE " << o.count() << ' ' << o.left.rows() << ' '
             << o.right.rows() << '\n';
          for (Eigen::Index i = 0; i < o.left.cols(); ++i) {
            for (Eigen::Index j = 0; j < o.left.rows(); ++j)
              os << (j ? " " : "") << o.left(j, i);
            for (Eigen::Index j = 0; j < o.right.rows(); ++j)
              os << ' ' << o.right(j, i);
            os << '\n';
          }
        } else {
          os << "INNER SKETCH " << o.A.rows() << ' ' << o.B.rows() << ' ' << o.A.cols()
             << ' ' << o.B.cols() << '\n';
          write_matrix_rows(os, o.A);
          write_matrix_rows(os, o.B);
        }
      },
      op);
}

inline InnerOperator read_inner(std::istream &is, const InnerOperator *previous) {
  io_detail::expect_token(is, "INNER");
  std::string kind;
  is >> kind;
  if (kind == "SAME") {
    if (!previous)
      throw FormatError("INNER SAME without a preceding operator");
    return *previous;
  }
  if (kind == "GAUSSIAN") {
    const auto m = io_detail::read_count(is, "sample count");
    const auto rows = io_detail::read_positive(is, "rows");
    const auto cols = io_detail::read_positive(is, "cols");
    Eigen::MatrixXd S(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(rows * cols));
    for (std::size_t i = 0; i < m; ++i)
      S.row(static_cast<Eigen::Index>(i)) =
          read_matrix_rows(is, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))
              .reshaped()
              .transpose();
    return GaussianProjection{rows, cols, std::make_shared<const Eigen::MatrixXd>(std::move(S))};
  }
  if (kind == "ENTRIES") {
    const auto m = io_detail::read_count(is, "sample count");
    EntrySampling es{io_detail::read_positive(is, "rows"), io_detail::read_positive(is, "cols"), {}};
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = io_detail::read_count(is, "entry row");
      const auto c = io_detail::read_count(is, "entry column");
      es.omega.push_back({r, c});
    }
    return es;
  }
  if (kind == "RANKONE") {
    const auto m = static_cast<Eigen::Index>(io_detail::read_count(is, "sample count"));
    const auto rows = static_cast<Eigen::Index>(io_detail::read_positive(is, "rows"));
    const auto cols = static_cast<Eigen::Index>(io_detail::read_positive(is, "cols"));
    RankOneProjection op{Eigen::MatrixXd(rows, m), Eigen::MatrixXd(cols, m)};
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < rows; ++j)
        op.left(j, i) = io_detail::read_double(is);
      for (Eigen::Index j = 0; j < cols; ++j)
        op.right(j, i) = io_detail::read_double(is);
    }
    return op;
  }
  if (kind == "SKETCH") {
    const auto m1 = static_cast<Eigen::Index>(io_detail::read_positive(is, "sketch rows"));
    const auto m2 = static_cast<Eigen::Index>(io_detail::read_positive(is, "sketch cols"));
    const auto rows = static_cast<Eigen::Index>(io_detail::read_positive(is, "rows"));
    const auto cols = static_cast<Eigen::Index>(io_detail::read_positive(is, "cols"));
    Sketch op{read_matrix_rows(is, m1, rows), Eigen::MatrixXd()};
    op.B = read_matrix_rows(is, m2, cols);
    return op;
  }
  throw FormatError("unknown inner operator kind '" + kind + "'");
}

} // namespace detail

inline void write_measurement_set(std::ostream &os, const MeasurementSet &ms) {
  io_detail::set_precision(os);
  os << "MSET 1 " << ms.sourceDims.size();
  for (auto n : ms.sourceDims)
    os << ' ' << n;
  os << "\nMODES " << ms.modes.size() << '\n';
  for (const auto &m : ms.modes) {
    os << "MODE " << m.mode << '\n';
    for (std::size_t g = 0; g < 2; ++g) {
      const auto &grp = m.groups[g];
      os << "GROUP " << g + 1 << '\n';
      if (const auto *w = std::get_if<DenseTensor>(&grp.op.weight())) {
        os << "WEIGHT DENSE\n";
        write_tensor(os, *w);
      } else {
        os << "WEIGHT SLICE";
        for (auto c : std::get<SliceIndex>(grp.op.weight()).fixed)
          os << ' ' << c;
        os << '\n';
      }
      if (g == 1 && same_inner(grp.op.inner(), m.groups[0].op.inner()))
        os << "INNER SAME\n";
      else
        detail::write_inner(os, grp.op.inner());
      os << "Y " << grp.y.size() << '\n';
      for (Eigen::Index i = 0; i < grp.y.size(); ++i)
        os << (i ? " " : "") << grp.y(i);
      os << '\n';
    }
  }
}

inline MeasurementSet read_measurement_set(std::istream &is) {
  io_detail::expect_token(is, "MSET");
  io_detail::expect_token(is, "1");
  const auto K = io_detail::read_positive(is, "order");
  Dims dims(K);
  for (auto &n : dims)
    n = io_detail::read_positive(is, "dimension");
  io_detail::expect_token(is, "MODES");
  const auto count = io_detail::read_count(is, "mode count");
  MeasurementSet ms{dims, {}};
  for (std::size_t i = 0; i < count; ++i) {
    io_detail::expect_token(is, "MODE");
    const auto k = io_detail::read_count(is, "mode index");
    if (k + 1 >= K)
      throw FormatError("mode pair index " + std::to_string(k) + " invalid for order " +
                        std::to_string(K));
    std::vector<MeasurementGroup> groups;
    for (std::size_t g = 0; g < 2; ++g) {
      io_detail::expect_token(is, "GROUP");
      io_detail::expect_token(is, std::to_string(g + 1));
      io_detail::expect_token(is, "WEIGHT");
      std::string wk;
      is >> wk;
      Weight w = DenseTensor{};
      if (wk == "DENSE") {
        w = read_tensor(is);
      } else if (wk == "SLICE") {
        SliceIndex s{mode_pair(k), std::vector<std::size_t>(K - 2)};
        for (auto &c : s.fixed)
          c = io_detail::read_count(is, "slice coordinate");
        w = std::move(s);
      } else {
        throw FormatError("unknown weight kind '" + wk + "'");
      }
      auto inner = detail::read_inner(is, g == 1 ? &groups[0].op.inner() : nullptr);
      SeparableOperator op(dims, k, std::move(w), std::move(inner));
      io_detail::expect_token(is, "Y");
      const auto len = static_cast<Eigen::Index>(io_detail::read_count(is, "observation count"));
      Eigen::VectorXd y(len);
      for (Eigen::Index j = 0; j < len; ++j)
        y(j) = io_detail::read_double(is);
      groups.push_back({std::move(op), std::move(y)});
    }
    ms.modes.push_back({k, {std::move(groups[0]), std::move(groups[1])}});
  }
  validate_measurement_set(ms);
  return ms;
}

inline void save_measurement_set(const std::string &path, const MeasurementSet &ms) {
  save_file(path, ms, [](std::ostream &os, const MeasurementSet &x) { write_measurement_set(os, x); });
}
inline MeasurementSet load_measurement_set(const std::string &path) {
  return load_file(path, [](std::istream &is) { return read_measurement_set(is); });
}

} // namespace trecs
