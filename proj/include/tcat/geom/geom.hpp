#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tcat/diff/tensor.hpp"

// Non-differentiable geometric kernels. Everything here is brute force and
// pure; ties are always broken by the lowest index.
namespace tcat::geom {

using Point3 = std::array<double, 3>;
using Coords = std::vector<Point3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

double distance(const Point3& a, const Point3& b);

/// Similarity taking a cloud to zero centroid and unit max radius.
struct Normalization {
  Point3 center{0.0, 0.0, 0.0};
  double scale = 1.0;  // multiply after subtracting center

  Point3 apply(const Point3& p) const;
  Coords apply(const Coords& c) const;
  // Offsets are differences of points, so only the scale applies.
  Point3 apply_vector(const Point3& v) const;
};

Normalization fit_normalization(const Coords& c);
Coords normalize(const Coords& c);

/// Lexicographic (x, y, z) order, stable by original index.
std::vector<std::size_t> canonical_order(const Coords& c);

std::vector<std::size_t> farthest_point_sample(const Coords& c, std::size_t m,
                                               std::size_t seed_index = 0);

/// Max over points of the distance to the nearest selected point.
double covering_radius(const Coords& c, std::span<const std::size_t> selected);

struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::size_t> index;  // queries * k, rectangular after padding
  std::vector<std::size_t> count;  // genuine neighbors per query (before padding)
  std::vector<std::uint8_t> fallback;  // 1 when the ball was empty

  std::size_t queries() const { return count.size(); }
  std::span<const std::size_t> row(std::size_t q) const {
    return {index.data() + q * k, k};
  }
};

/// Up to K source points within `radius` of each query, nearest first. An
/// empty ball falls back to the single nearest point; short rows are padded
/// by repeating their first entry.
NeighborTable ball_query(const Coords& queries, const Coords& source, double radius,
                         std::size_t k);

/// Exact k nearest neighbors, nearest first.
NeighborTable knn(const Coords& queries, const Coords& source, std::size_t k);

/// Inverse-distance weights 1/(d + 1e-8), normalized. A neighbor closer than
/// 1e-8 takes all the weight.
std::vector<double> idw_weights(const Point3& query, std::span<const Point3> neighbors);

/// Majority label among the k nearest labeled points (k clipped to the labeled
/// count); ties go to the smallest label.
std::vector<int> propagate_labels(const Coords& labeled, std::span<const int> labels,
                                  const Coords& targets, std::size_t k = 5);

diff::Tensor to_tensor(const Coords& c);
Coords from_tensor(const diff::Tensor& t);

}  // namespace tcat::geom
