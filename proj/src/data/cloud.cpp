#include "tcat/data/cloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include "tcat/errors.hpp"

namespace tcat::data {

using geom::Coords;
using geom::Point3;

geom::Coords LabeledCloud::centroid_positions() const {
  Coords out;
  out.reserve(centroids.size());
  for (const auto& c : centroids) out.push_back(c.position);
  return out;
}

void LabeledCloud::validate() const {
  const std::size_t n = points.size();
  if (normals.size() != n || labels.size() != n || instances.size() != n) {
    throw ValidationError("cloud: points, normals, labels and instances differ in length");
  }
  for (const Coords* c : {&points, &normals}) {
    for (const auto& p : *c) {
      for (double v : p) {
        if (!std::isfinite(v)) throw ValidationError("cloud: non-finite coordinate");
      }
    }
  }
  std::map<int, int> seen;  // instance -> centroid rows
  for (int id : instances) {
    if (id < 0) throw ValidationError("cloud: negative instance id");
    if (id > 0) seen[id] = 0;
  }
  int prev = 0;
  for (const auto& c : centroids) {
    if (c.instance <= prev) throw ValidationError("cloud: centroid table not ascending by instance");
    prev = c.instance;
    auto it = seen.find(c.instance);
    if (it == seen.end()) {
      throw ValidationError("cloud: centroid for absent instance " + std::to_string(c.instance));
    }
    ++it->second;
    for (double v : c.position) {
      if (!std::isfinite(v)) throw ValidationError("cloud: non-finite centroid");
    }
  }
  for (const auto& [id, rows] : seen) {
    if (rows != 1) throw ValidationError("cloud: instance " + std::to_string(id) + " has no centroid");
  }
}

std::vector<Centroid> compute_centroids(const Coords& points, const std::vector<int>& labels,
                                        const std::vector<int>& instances) {
  struct Acc {
    Point3 sum{};
    std::size_t count = 0;
    int label = 0;
  };
  std::map<int, Acc> acc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (instances[i] <= 0) continue;
    auto [it, inserted] = acc.try_emplace(instances[i]);
    if (inserted) it->second.label = labels[i];
    for (int d = 0; d < 3; ++d) it->second.sum[d] += points[i][d];
    ++it->second.count;
  }
  std::vector<Centroid> out;
  for (const auto& [id, a] : acc) {
    Centroid c;
    c.instance = id;
    c.label = a.label;
    for (int d = 0; d < 3; ++d) c.position[d] = a.sum[d] / static_cast<double>(a.count);
    out.push_back(c);
  }
  return out;
}

void ArchSpec::validate() const {
  if (teeth < 1 || teeth > 16) {
    throw ValidationError("arch: tooth count must be in 1..16, got " + std::to_string(teeth));
  }
  for (double r : radii) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("arch: radii must be positive");
  }
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ValidationError("arch: jitter must be in [0,1)");
  if (!(crowding >= 0.0 && crowding <= 1.0)) throw ValidationError("arch: crowding must be in [0,1]");
  if (!(curvature >= 0.0) || !std::isfinite(curvature)) {
    throw ValidationError("arch: curvature must be finite and non-negative");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("arch: spacing must be positive");
  if (points_per_tooth == 0) throw ValidationError("arch: points per tooth must be positive");
  if (missing.size() > static_cast<std::size_t>(teeth)) {
    throw ValidationError("arch: missing mask longer than the tooth count");
  }
  if (std::count(missing.begin(), missing.end(), true) == teeth) {
    throw ValidationError("arch: every tooth is missing");
  }
}

void distribute_points(ArchSpec& spec, std::size_t total) {
  std::size_t present = static_cast<std::size_t>(spec.teeth);
  for (bool m : spec.missing) present -= m ? 1 : 0;
  if (present == 0 || total < 4 * present) {
    throw ValidationError("arch: " + std::to_string(total) + " points is too few for " +
                          std::to_string(present) + " teeth");
  }
  const std::size_t gingiva = total / 4;
  spec.points_per_tooth = (total - gingiva) / present;
  spec.gingiva_points = total - spec.points_per_tooth * present;
}

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double symmetric(std::mt19937_64& rng) { return 2.0 * unit(rng) - 1.0; }

// Arc length of y = a x^2 from 0 to x.
double arc_length(double a, double x) {
  if (a == 0.0) return x;
  const double u = 2.0 * a * x;
  return (x * std::sqrt(1.0 + u * u)) / 2.0 + std::asinh(u) / (4.0 * a);
}

double x_at_arc(double a, double s) {
  double lo = -std::abs(s) - 1.0, hi = std::abs(s) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (arc_length(a, mid) < s ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Frame {
  Point3 origin;
  Point3 tangent;
  Point3 lateral;  // in-plane normal of the arch curve
};

Frame arch_frame(double a, double s) {
  const double x = x_at_arc(a, s);
  const double tx = 1.0, ty = 2.0 * a * x;
  const double len = std::hypot(tx, ty);
  return {{x, a * x * x, 0.0}, {tx / len, ty / len, 0.0}, {-ty / len, tx / len, 0.0}};
}

Point3 rotate_z(const Point3& v, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
}

struct Tooth {
  Point3 center;
  std::array<Point3, 3> axes;  // orthonormal
  Point3 radii;
  int index;
};

Point3 to_local(const Tooth& t, const Point3& p) {
  Point3 d{p[0] - t.center[0], p[1] - t.center[1], p[2] - t.center[2]};
  Point3 out{};
  for (int k = 0; k < 3; ++k) {
    out[k] = d[0] * t.axes[k][0] + d[1] * t.axes[k][1] + d[2] * t.axes[k][2];
  }
  return out;
}

bool inside(const Tooth& t, const Point3& p) {
  const Point3 l = to_local(t, p);
  double q = 0.0;
  for (int k = 0; k < 3; ++k) q += (l[k] / t.radii[k]) * (l[k] / t.radii[k]);
  return q < 1.0;
}

Point3 normalized(const Point3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

LabeledCloud generate_arch(const ArchSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double step = spec.spacing * (1.0 - 0.3 * spec.crowding);
  const double half = 0.5 * static_cast<double>(spec.teeth - 1) * step;

  std::vector<Tooth> teeth;
  for (int k = 0; k < spec.teeth; ++k) {
    // Every tooth draws its perturbations so a missing mask does not shift
    // the random stream of the remaining teeth.
    Point3 radii;
    for (int d = 0; d < 3; ++d) radii[d] = spec.radii[d] * (1.0 + spec.jitter * symmetric(rng));
    const double shift = 0.2 * spec.crowding * spec.spacing * symmetric(rng);
    const double theta = 0.5 * spec.crowding * symmetric(rng);
    const bool missing = static_cast<std::size_t>(k) < spec.missing.size() && spec.missing[k];
    if (missing) continue;
    const Frame f = arch_frame(spec.curvature, -half + static_cast<double>(k) * step);
    Tooth t;
    for (int d = 0; d < 3; ++d) t.center[d] = f.origin[d] + shift * f.lateral[d];
    t.axes = {rotate_z(f.tangent, theta), rotate_z(f.lateral, theta), Point3{0.0, 0.0, 1.0}};
    t.radii = radii;
    t.index = k;
    teeth.push_back(t);
  }

  LabeledCloud cloud;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (const Tooth& t : teeth) {
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const std::size_t m = spec.points_per_tooth;
    for (std::size_t i = 0; i < m; ++i) {
      const double uz = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(m);
      const double r = std::sqrt(std::max(0.0, 1.0 - uz * uz));
      const double phi = static_cast<double>(i) * golden + phase;
      const Point3 u{r * std::cos(phi), r * std::sin(phi), uz};
      Point3 p = t.center, g{};
      for (int k = 0; k < 3; ++k) {
        for (int d = 0; d < 3; ++d) {
          p[d] += t.radii[k] * u[k] * t.axes[k][d];
          g[d] += u[k] / t.radii[k] * t.axes[k][d];
        }
      }
      cloud.points.push_back(p);
      cloud.normals.push_back(normalized(g));
      cloud.labels.push_back(t.index + 1);
      cloud.instances.push_back(t.index + 1);
    }
  }

  // Upper half of a tube swept along the arch below the tooth centers.
  const double tube_radius = 1.2 * spec.radii[1];
  const double tube_z = -0.6 * spec.radii[2];
  const double s_lo = -half - 0.5 * spec.spacing, s_hi = half + 0.5 * spec.spacing;
  std::size_t placed = 0, attempts = 0;
  while (placed < spec.gingiva_points) {
    if (++attempts > 1000 * (spec.gingiva_points + 1)) {
      throw ValidationError("arch: gingiva band is fully covered by teeth");
    }
    const double s = s_lo + (s_hi - s_lo) * unit(rng);
    const double phi = std::numbers::pi * unit(rng);
    const Frame f = arch_frame(spec.curvature, s);
    Point3 n{};
    for (int d = 0; d < 3; ++d) n[d] = std::cos(phi) * f.lateral[d];
    n[2] += std::sin(phi);
    Point3 p{};
    for (int d = 0; d < 3; ++d) p[d] = f.origin[d] + tube_radius * n[d];
    p[2] += tube_z;
    if (std::any_of(teeth.begin(), teeth.end(), [&](const Tooth& t) { return inside(t, p); })) {
      continue;
    }
    cloud.points.push_back(p);
    cloud.normals.push_back(normalized(n));
    cloud.labels.push_back(0);
    cloud.instances.push_back(0);
    ++placed;
  }

  cloud.centroids = compute_centroids(cloud.points, cloud.labels, cloud.instances);
  return cloud;
}

diff::Tensor derive_offsets(const LabeledCloud& cloud) {
  std::map<int, Point3> centroid;
  for (const auto& c : cloud.centroids) centroid[c.instance] = c.position;
  std::vector<double> out(cloud.size() * 3, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int id = cloud.instances[i];
    if (id == 0) continue;
    auto it = centroid.find(id);
    if (it == centroid.end()) {
      throw ValidationError("derive_offsets: instance " + std::to_string(id) + " has no centroid");
    }
    for (int d = 0; d < 3; ++d) out[i * 3 + d] = it->second[d] - cloud.points[i][d];
  }
  return diff::Tensor::from({cloud.size(), 3}, std::move(out));
}

LabeledCloud reorder(const LabeledCloud& cloud, const std::vector<std::size_t>& order) {
  LabeledCloud out;
  for (std::size_t i : order) {
    out.points.push_back(cloud.points.at(i));
    out.normals.push_back(cloud.normals.at(i));
    out.labels.push_back(cloud.labels.at(i));
    out.instances.push_back(cloud.instances.at(i));
  }
  out.centroids = compute_centroids(out.points, out.labels, out.instances);
  return out;
}

LabeledCloud resample(const LabeledCloud& cloud, std::size_t n_target, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ValidationError("resample: empty cloud");
  if (n_target == 0) throw ValidationError("resample: target count must be positive");
  const LabeledCloud sorted = reorder(cloud, geom::canonical_order(cloud.points));
  std::vector<std::size_t> keep;
  if (n_target <= n) {
    keep = geom::farthest_point_sample(sorted.points, n_target, seed % n);
    std::sort(keep.begin(), keep.end());
  } else {
    std::cerr << "warning: upsampling " << n << " points to " << n_target
              << " by duplication\n";
    keep.resize(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i < n_target; ++i) keep.push_back(rng() % n);
    std::sort(keep.begin(), keep.end());
  }
  return reorder(sorted, keep);
}

std::string format_cloud(const LabeledCloud& cloud) {
  cloud.validate();
  std::string out = "TCATCLOUD v1\n";
  out += "n " + std::to_string(cloud.size()) + " t " + std::to_string(cloud.centroids.size()) + "\n";
  char buf[512];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& nv = cloud.normals[i];
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g %d %d\n", p[0], p[1], p[2],
                  nv[0], nv[1], nv[2], cloud.labels[i], cloud.instances[i]);
    out += buf;
  }
  for (const auto& c : cloud.centroids) {
    std::snprintf(buf, sizeof buf, "centroid %d %.17g %.17g %.17g\n", c.label, c.position[0],
                  c.position[1], c.position[2]);
    out += buf;
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("cloud: malformed number '" + std::string(tok) + "' on line " +
                         std::to_string(line),
                     line);
  }
  return v;
}

double parse_coordinate(std::string_view tok, std::size_t line) {
  const double v = parse_number<double>(tok, line);
  if (!std::isfinite(v)) {
    throw ValidationError("cloud: non-finite value on line " + std::to_string(line));
  }
  return v;
}

}  // namespace

LabeledCloud parse_cloud(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  auto truncated = [](std::size_t last_good) {
    return ParseError("cloud: unexpected end of file after line " + std::to_string(last_good),
                      last_good);
  };
  if (lines.empty() || split(lines[0]) != std::vector<std::string_view>{"TCATCLOUD", "v1"}) {
    throw FormatError("cloud: missing 'TCATCLOUD v1' magic");
  }
  if (lines.size() < 2) throw truncated(1);
  const auto header = split(lines[1]);
  if (header.size() != 4 || header[0] != "n" || header[2] != "t") {
    throw ParseError("cloud: expected 'n <count> t <teeth>' on line 2", 2);
  }
  const auto n = parse_number<std::size_t>(header[1], 2);
  const auto t = parse_number<std::size_t>(header[3], 2);

  LabeledCloud cloud;
  std::size_t ln = 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (ln >= lines.size()) throw truncated(ln);
    ++ln;
    const auto tok = split(lines[ln - 1]);
    if (tok.size() != 8) {
      throw ParseError("cloud: expected 8 fields on line " + std::to_string(ln), ln);
    }
    Point3 p, nv;
    for (int d = 0; d < 3; ++d) {
      p[d] = parse_coordinate(tok[d], ln);
      nv[d] = parse_coordinate(tok[3 + d], ln);
    }
    cloud.points.push_back(p);
    cloud.normals.push_back(nv);
    cloud.labels.push_back(parse_number<int>(tok[6], ln));
    cloud.instances.push_back(parse_number<int>(tok[7], ln));
  }

  std::vector<int> ids;
  for (int id : cloud.instances) {
    if (id > 0) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() != t) {
    throw ValidationError("cloud: header declares " + std::to_string(t) + " teeth but points carry " +
                          std::to_string(ids.size()) + " instances");
  }
  for (std::size_t k = 0; k < t; ++k) {
    if (ln >= lines.size()) throw truncated(ln);
    ++ln;
    const auto tok = split(lines[ln - 1]);
    if (tok.size() != 5 || tok[0] != "centroid") {
      throw ParseError("cloud: expected 'centroid <class> cx cy cz' on line " + std::to_string(ln),
                       ln);
    }
    Centroid c;
    c.instance = ids[k];
    c.label = parse_number<int>(tok[1], ln);
    for (int d = 0; d < 3; ++d) c.position[d] = parse_coordinate(tok[2 + d], ln);
    cloud.centroids.push_back(c);
  }
  for (std::size_t i = ln; i < lines.size(); ++i) {
    if (!split(lines[i]).empty()) {
      throw ParseError("cloud: trailing content on line " + std::to_string(i + 1), i + 1);
    }
  }
  cloud.validate();
  return cloud;
}

void write_cloud(const std::filesystem::path& path, const LabeledCloud& cloud) {
  const std::string text = format_cloud(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

LabeledCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cloud(ss.str());
}

}  // namespace tcat::data
