#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcat/diff/tensor.hpp"
#include "tcat/geom/geom.hpp"

namespace tcat::data {

struct Centroid {
  int instance = 0;
  int label = 0;
  geom::Point3 position{};
};

/// Instance id 0 is gingiva. Centroids are ascending by instance id, one per
/// instance id > 0.
struct LabeledCloud {
  geom::Coords points;
  geom::Coords normals;
  std::vector<int> labels;
  std::vector<int> instances;
  std::vector<Centroid> centroids;

  std::size_t size() const { return points.size(); }
  geom::Coords centroid_positions() const;
  /// Throws ValidationError on length mismatches, non-finite values, or a
  /// centroid table that does not cover the instance ids exactly once.
  void validate() const;
};

/// Means of each instance's points, ascending by instance id. The label is
/// that of the instance's first point.
std::vector<Centroid> compute_centroids(const geom::Coords& points, const std::vector<int>& labels,
                                        const std::vector<int>& instances);

struct ArchSpec {
  int teeth = 14;                   // 1..16
  double curvature = 0.1;           // y = curvature * x^2
  double spacing = 1.0;             // arc length between neighboring tooth centers
  geom::Point3 radii{0.45, 0.4, 0.5};  // tangent, lateral, vertical semi-axes
  double jitter = 0.1;              // relative per-tooth semi-axis perturbation
  double crowding = 0.0;            // 0..1
  std::vector<bool> missing;        // by tooth index; shorter masks pad with false
  std::size_t points_per_tooth = 55;
  std::size_t gingiva_points = 254;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Splits `total` points between gingiva (a quarter) and the present teeth.
void distribute_points(ArchSpec& spec, std::size_t total);

/// Deterministic per seed. Tooth k (0-based) carries label and instance k+1.
LabeledCloud generate_arch(const ArchSpec& spec);

/// Instance centroid minus point for tooth points, zero for gingiva. [n,3].
diff::Tensor derive_offsets(const LabeledCloud& cloud);

/// Canonically ordered subset of `n_target` points chosen by farthest point
/// sampling from start index `seed % n`. Larger targets keep every point and
/// append seeded duplicates. Centroids are recomputed on the result.
LabeledCloud resample(const LabeledCloud& cloud, std::size_t n_target, std::uint64_t seed);

LabeledCloud reorder(const LabeledCloud& cloud, const std::vector<std::size_t>& order);

/// TCATCLOUD v1 text. Doubles use 17 significant digits, so write then read is
/// bit-exact.
std::string format_cloud(const LabeledCloud& cloud);
LabeledCloud parse_cloud(const std::string& text);
void write_cloud(const std::filesystem::path& path, const LabeledCloud& cloud);
LabeledCloud read_cloud(const std::filesystem::path& path);

}  // namespace tcat::data
