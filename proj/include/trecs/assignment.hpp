#pragma once

#include "error.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace trecs {

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3) potentials formulation). Returns `assign` with row i matched to
/// column assign[i].
inline std::vector<Eigen::Index> min_cost_assignment(const Eigen::MatrixXd &cost) {
  if (cost.rows() != cost.cols())
    throw ShapeError("assignment needs a square cost matrix");
  const Eigen::Index n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual source
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> p(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = p[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 1; j <= n; ++j)
    assign[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return assign;
}

} // namespace trecs
