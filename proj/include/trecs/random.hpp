#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace trecs {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a seed from a base seed and a list of coordinates, e.g.
/// (seed, r, m, trial). Distinct coordinate tuples give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = mix_seed(base);
  for (auto c : coords)
    h = mix_seed(h ^ mix_seed(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Eigen::MatrixXd random_normal(Eigen::Index rows, Eigen::Index cols,
                                     Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // column-major fill order is part of the replay contract
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = dist(rng);
  return m;
}

inline Eigen::VectorXd random_normal(Eigen::Index n, Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = dist(rng);
  return v;
}

} // namespace trecs
