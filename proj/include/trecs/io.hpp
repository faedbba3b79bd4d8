#pragma once

// Text formats.
//
// DTNS v1 (dense tensor)
//   DTNS 1 <K> <n_1> ... <n_K>
//   <values in layout order, last index fastest; one line per n_K values>
//
// CPM v1 (CP model)
//   CPM 1 <K> <r> <n_1> ... <n_K>
//   <r weights>
//   <factor 1, n_1 rows of r values>
//   ...
//   <factor K, n_K rows of r values>
//
// Values are printed with 17 significant digits, which round-trips doubles.

#include "cp_model.hpp"
#include "error.hpp"
#include "tensor.hpp"

#include <Eigen/Dense>

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace trecs {

namespace io_detail {

inline void set_precision(std::ostream &os) { os << std::setprecision(17); }

template <class T>
T read_value(std::istream &is, const char *what) {
  T v{};
  if (!(is >> v))
    throw FormatError(std::string("expected ") + what);
  return v;
}

inline void expect_token(std::istream &is, const std::string &tok) {
  std::string got;
  if (!(is >> got) || got != tok)
    throw FormatError("expected '" + tok + "', got '" + got + "'");
}

inline std::size_t read_count(std::istream &is, const char *what) {
  long long v = 0;
  if (!(is >> v) || v < 0)
    throw FormatError(std::string("expected nonnegative ") + what);
  return static_cast<std::size_t>(v);
}

inline std::size_t read_positive(std::istream &is, const char *what) {
  const auto v = read_count(is, what);
  if (v == 0)
    throw FormatError(std::string(what) + " must be positive");
  return v;
}

inline double read_double(std::istream &is) {
  std::string tok;
  if (!(is >> tok))
    throw FormatError("unexpected end of data");
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception &) {
    throw FormatError("malformed number '" + tok + "'");
  }
  if (used != tok.size())
    throw FormatError("malformed number '" + tok + "'");
  return v;
}

} // namespace io_detail

inline void write_tensor(std::ostream &os, const DenseTensor &t) {
  io_detail::set_precision(os);
  os << "DTNS 1 " << t.order();
  for (auto n : t.dims())
    os << ' ' << n;
  os << '\n';
  const std::size_t row = t.dims().back();
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    os << d[i] << ((i + 1) % row == 0 ? '\n' : ' ');
}

inline DenseTensor read_tensor(std::istream &is) {
  io_detail::expect_token(is, "DTNS");
  io_detail::expect_token(is, "1");
  const auto K = io_detail::read_positive(is, "tensor order");
  Dims dims(K);
  for (auto &n : dims)
    n = io_detail::read_positive(is, "dimension");
  std::vector<double> data(detail::checked_volume(dims));
  for (auto &x : data)
    x = io_detail::read_double(is);
  return {std::move(dims), std::move(data)};
}

inline void write_matrix_rows(std::ostream &os, const Eigen::MatrixXd &m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << (j ? " " : "") << m(i, j);
    os << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_rows(std::istream &is, Eigen::Index rows,
                                        Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = io_detail::read_double(is);
  return m;
}

inline void write_cp_model(std::ostream &os, const CPModel &m) {
  io_detail::set_precision(os);
  os << "CPM 1 " << m.order() << ' ' << m.rank();
  for (auto n : m.dims())
    os << ' ' << n;
  os << '\n';
  for (Eigen::Index l = 0; l < m.weights().size(); ++l)
    os << (l ? " " : "") << m.weights()(l);
  os << '\n';
  for (const auto &f : m.factors())
    write_matrix_rows(os, f);
}

inline CPModel read_cp_model(std::istream &is) {
  io_detail::expect_token(is, "CPM");
  io_detail::expect_token(is, "1");
  const auto K = io_detail::read_positive(is, "model order");
  const auto r = static_cast<Eigen::Index>(io_detail::read_count(is, "rank"));
  Dims dims(K);
  for (auto &n : dims)
    n = io_detail::read_positive(is, "dimension");
  Eigen::VectorXd w(r);
  for (Eigen::Index l = 0; l < r; ++l)
    w(l) = io_detail::read_double(is);
  std::vector<Eigen::MatrixXd> factors;
  for (auto n : dims)
    factors.push_back(read_matrix_rows(is, static_cast<Eigen::Index>(n), r));
  return {std::move(factors), std::move(w)};
}

template <class Writer, class Value>
void save_file(const std::string &path, const Value &v, Writer write) {
  std::ofstream os(path);
  if (!os)
    throw IoError("cannot open '" + path + "' for writing");
  write(os, v);
  if (!os)
    throw IoError("write to '" + path + "' failed");
}

template <class Reader>
auto load_file(const std::string &path, Reader read) {
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot open '" + path + "' for reading");
  return read(is);
}

inline void save_tensor(const std::string &path, const DenseTensor &t) {
  save_file(path, t, [](std::ostream &os, const DenseTensor &x) { write_tensor(os, x); });
}
inline DenseTensor load_tensor(const std::string &path) {
  return load_file(path, [](std::istream &is) { return read_tensor(is); });
}
inline void save_cp_model(const std::string &path, const CPModel &m) {
  save_file(path, m, [](std::ostream &os, const CPModel &x) { write_cp_model(os, x); });
}
inline CPModel load_cp_model(const std::string &path) {
  return load_file(path, [](std::istream &is) { return read_cp_model(is); });
}

} // namespace trecs
