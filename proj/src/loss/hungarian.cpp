#include "tcat/loss/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tcat/errors.hpp"

namespace tcat::loss {

namespace {

struct SquareSolution {
  std::vector<std::size_t> col_of_row;
  std::vector<double> u, v;  // row / column potentials
};

// Shortest augmenting path Hungarian with potentials on a dense n x n matrix.
SquareSolution solve_square(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
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
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  SquareSolution s;
  s.col_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j]) s.col_of_row[p[j] - 1] = j - 1;
  }
  s.u.assign(u.begin() + 1, u.end());
  s.v.assign(v.begin() + 1, v.end());
  return s;
}

}  // namespace

double assignment_cost(const CostMatrix& cost,
                       const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost[r][c];
  return total;
}

Assignment hungarian(const CostMatrix& cost) {
  const std::size_t rows = cost.size();
  if (rows == 0 || cost[0].empty()) throw ValidationError("hungarian: empty cost matrix");
  const std::size_t cols = cost[0].size();
  double max_abs = 0.0;
  for (const auto& row : cost) {
    if (row.size() != cols) throw ValidationError("hungarian: ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c)) throw ValidationError("hungarian: non-finite cost");
      max_abs = std::max(max_abs, std::abs(c));
    }
  }

  const std::size_t n = std::max(rows, cols);
  const double sentinel = 1e6 * std::max(max_abs, 1.0);
  std::vector<double> a(n * n, sentinel);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) a[r * n + c] = cost[r][c];

  auto real_cost = [&](const std::vector<std::size_t>& col_of_row) {
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (col_of_row[r] < cols) total += cost[r][col_of_row[r]];
    }
    return total;
  };

  const SquareSolution base = solve_square(a, n);
  std::vector<std::size_t> cur = base.col_of_row;
  const double best = real_cost(cur);
  const double tol = 1e-11 * (1.0 + max_abs * static_cast<double>(n));
  const double tight_tol = 1e-9 * (sentinel + 1.0);

  // Lexicographic refinement: walk rows in order and move each to the smallest
  // real column that still admits an optimal completion. Only edges tight under
  // the optimal potentials can appear in any optimum, which prunes the search.
  std::vector<char> col_fixed(n, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t limit = cur[i] < cols ? cur[i] : cols;
    for (std::size_t j = 0; j < limit; ++j) {
      if (col_fixed[j]) continue;
      if (std::abs(a[i * n + j] - base.u[i] - base.v[j]) > tight_tol) continue;

      std::vector<std::size_t> sub_rows, sub_cols;
      for (std::size_t r = i + 1; r < n; ++r) sub_rows.push_back(r);
      for (std::size_t c = 0; c < n; ++c) {
        if (!col_fixed[c] && c != j) sub_cols.push_back(c);
      }
      const std::size_t m = sub_rows.size();
      std::vector<double> sub(m * m);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) sub[r * m + c] = a[sub_rows[r] * n + sub_cols[c]];
      std::vector<std::size_t> trial = cur;
      trial[i] = j;
      if (m > 0) {
        const SquareSolution s = solve_square(sub, m);
        for (std::size_t r = 0; r < m; ++r) trial[sub_rows[r]] = sub_cols[s.col_of_row[r]];
      }
      if (real_cost(trial) <= best + tol) {
        cur = std::move(trial);
        break;
      }
    }
    col_fixed[cur[i]] = 1;
  }

  Assignment out;
  for (std::size_t r = 0; r < rows; ++r) {
    if (cur[r] < cols) out.pairs.emplace_back(r, cur[r]);
  }
  out.cost = assignment_cost(cost, out.pairs);
  return out;
}

}  // namespace tcat::loss
