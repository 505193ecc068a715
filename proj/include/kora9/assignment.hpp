#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace kora9 {

// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
// potentials). Returns col_of_row.
inline std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) col_of_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return col_of_row;
}

// Gated global-nearest-neighbour assignment. Entries of `cost` above `gate`
// are forbidden; leaving a row or column unassigned costs `gate`. Returns
// (row, col) pairs.
inline std::vector<std::pair<int, int>> gated_assignment(const Eigen::MatrixXd& cost, double gate) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  std::vector<std::pair<int, int>> out;
  if (rows == 0 || cols == 0) return out;
  const double big = 1e9 + 1e3 * gate;
  const int n = rows + cols;
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, big);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (cost(i, j) <= gate) a(i, j) = cost(i, j);
  for (int i = 0; i < rows; ++i) a(i, cols + i) = gate;
  for (int j = 0; j < cols; ++j) a(rows + j, j) = gate;
  a.bottomRightCorner(cols, rows).setZero();

  const auto match = hungarian(a);
  for (int i = 0; i < rows; ++i) {
    const int j = match[static_cast<std::size_t>(i)];
    if (j >= 0 && j < cols && cost(i, j) <= gate) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace kora9
