#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace tcat::loss {

using CostMatrix = std::vector<std::vector<double>>;

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, column), rows ascending
  double cost = 0.0;
};

/// Minimum-cost assignment of min(rows, cols) pairs. Rectangular inputs are
/// padded to square with a large sentinel that is stripped from the result.
/// Among equal-cost optima the lexicographically smallest pair list wins.
Assignment hungarian(const CostMatrix& cost);

/// Sum of cost[r][c] over pairs, accumulated in pair order.
double assignment_cost(const CostMatrix& cost,
                       const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

}  // namespace tcat::loss
