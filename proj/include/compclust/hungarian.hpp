#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "pattern.hpp"
#include "weight_table.hpp"

namespace compclust {

/// Minimum-cost perfect assignment of an n x n matrix (rows to columns),
/// shortest augmenting paths with potentials, O(n^3).
inline std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual root
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

/// Matching maximising sum log w_ij over all partial matchings.
///
/// Edges with w <= 1 never help, so the benefit max(0, log w) is assigned on a
/// square padding of the table and only pairs with log w > 0 are kept.
inline BipartiteMatching hungarian_mode(const WeightTable& t) {
  const int n = std::max(t.n_red(), t.n_blue());
  BipartiteMatching rho(t.n_red(), t.n_blue());
  if (n == 0) return rho;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    const double lw = t.entry_log_weight(static_cast<int>(e));
    if (lw > 0.0) cost[t.entry_red(static_cast<int>(e))][t.entry_blue(static_cast<int>(e))] = -lw;
  }
  const auto assign = solve_assignment(cost);
  for (int i = 0; i < t.n_red(); ++i) {
    const int j = assign[i];
    if (j >= 0 && j < t.n_blue() && t.log_weight(i, j) > 0.0) rho.link(i, j);
  }
  return rho;
}

}  // namespace compclust
