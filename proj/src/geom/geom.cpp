#include "tcat/geom/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "tcat/errors.hpp"

namespace tcat::geom {

double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

Point3 Normalization::apply(const Point3& p) const {
  return {(p[0] - center[0]) * scale, (p[1] - center[1]) * scale, (p[2] - center[2]) * scale};
}

Coords Normalization::apply(const Coords& c) const {
  Coords out;
  out.reserve(c.size());
  for (const auto& p : c) out.push_back(apply(p));
  return out;
}

Point3 Normalization::apply_vector(const Point3& v) const {
  return {v[0] * scale, v[1] * scale, v[2] * scale};
}

Normalization fit_normalization(const Coords& c) {
  if (c.empty()) throw SizeError("normalize: empty point set");
  Normalization n;
  for (const auto& p : c)
    for (int d = 0; d < 3; ++d) n.center[d] += p[d];
  for (int d = 0; d < 3; ++d) n.center[d] /= static_cast<double>(c.size());
  double r2 = 0.0;
  for (const auto& p : c) r2 = std::max(r2, squared_distance(p, n.center));
  n.scale = r2 > 0.0 ? 1.0 / std::sqrt(r2) : 1.0;
  return n;
}

Coords normalize(const Coords& c) { return fit_normalization(c).apply(c); }

std::vector<std::size_t> canonical_order(const Coords& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return c[a] < c[b]; });
  return order;
}

std::vector<std::size_t> farthest_point_sample(const Coords& c, std::size_t m,
                                               std::size_t seed_index) {
  const std::size_t n = c.size();
  if (m < 1 || m > n) {
    throw SizeError("farthest_point_sample: cannot pick " + std::to_string(m) + " of " +
                    std::to_string(n) + " points");
  }
  if (seed_index >= n) throw IndexError("farthest_point_sample: seed index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(m);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> taken(n, 0);
  std::size_t current = seed_index;
  for (;;) {
    picked.push_back(current);
    taken[current] = 1;
    if (picked.size() == m) break;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(c[i], c[current]));
      if (!taken[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

double covering_radius(const Coords& c, std::span<const std::size_t> selected) {
  if (selected.empty()) throw SizeError("covering_radius: no selected points");
  double worst = 0.0;
  for (const auto& p : c) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s : selected) best = std::min(best, squared_distance(p, c[s]));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

namespace {

using Candidate = std::pair<double, std::size_t>;  // (squared distance, index)

std::vector<Candidate> by_distance(const Point3& q, const Coords& source) {
  std::vector<Candidate> cand(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) cand[i] = {squared_distance(q, source[i]), i};
  return cand;
}

}  // namespace

NeighborTable ball_query(const Coords& queries, const Coords& source, double radius,
                         std::size_t k) {
  if (source.empty()) throw SizeError("ball_query: empty source");
  if (!(radius > 0.0)) throw ValidationError("ball_query: radius must be positive");
  if (k < 1) throw ValidationError("ball_query: K must be at least 1");
  const double r2 = radius * radius;
  NeighborTable t;
  t.k = k;
  t.index.reserve(queries.size() * k);
  for (const auto& q : queries) {
    auto cand = by_distance(q, source);
    auto inside = std::partition(cand.begin(), cand.end(),
                                 [r2](const Candidate& c) { return c.first <= r2; });
    std::size_t found = static_cast<std::size_t>(inside - cand.begin());
    bool fell_back = false;
    if (found == 0) {
      auto nearest = std::min_element(cand.begin(), cand.end());
      std::iter_swap(cand.begin(), nearest);
      found = 1;
      fell_back = true;
    } else {
      const std::size_t take = std::min(found, k);
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take),
                        inside);
      found = take;
    }
    for (std::size_t j = 0; j < k; ++j) t.index.push_back(cand[j < found ? j : 0].second);
    t.count.push_back(found);
    t.fallback.push_back(fell_back ? 1 : 0);
  }
  return t;
}

NeighborTable knn(const Coords& queries, const Coords& source, std::size_t k) {
  if (k > source.size()) {
    throw SizeError("knn: k=" + std::to_string(k) + " exceeds source size " +
                    std::to_string(source.size()));
  }
  if (k == 0) throw ValidationError("knn: k must be at least 1");
  NeighborTable t;
  t.k = k;
  t.index.reserve(queries.size() * k);
  for (const auto& q : queries) {
    auto cand = by_distance(q, source);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) t.index.push_back(cand[j].second);
    t.count.push_back(k);
    t.fallback.push_back(0);
  }
  return t;
}

std::vector<double> idw_weights(const Point3& query, std::span<const Point3> neighbors) {
  constexpr double kEps = 1e-8;
  std::vector<double> w(neighbors.size(), 0.0);
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (distance(query, neighbors[i]) < kEps) {
      w[i] = 1.0;
      return w;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    w[i] = 1.0 / (distance(query, neighbors[i]) + kEps);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::vector<int> propagate_labels(const Coords& labeled, std::span<const int> labels,
                                  const Coords& targets, std::size_t k) {
  if (labeled.empty()) throw SizeError("propagate_labels: no labeled points");
  if (labels.size() != labeled.size()) {
    throw DimensionError("propagate_labels: label count does not match labeled points");
  }
  const NeighborTable nn = knn(targets, labeled, std::min(k, labeled.size()));
  std::vector<int> out;
  out.reserve(targets.size());
  for (std::size_t q = 0; q < targets.size(); ++q) {
    std::map<int, std::size_t> votes;
    for (std::size_t j : nn.row(q)) ++votes[labels[j]];
    int best = 0;
    std::size_t best_n = 0;
    for (const auto& [label, n] : votes) {
      if (n > best_n) {  // map order makes the smallest label win ties
        best = label;
        best_n = n;
      }
    }
    out.push_back(best);
  }
  return out;
}

diff::Tensor to_tensor(const Coords& c) {
  std::vector<double> v;
  v.reserve(c.size() * 3);
  for (const auto& p : c) v.insert(v.end(), p.begin(), p.end());
  return diff::Tensor::from({c.size(), 3}, std::move(v));
}

Coords from_tensor(const diff::Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw DimensionError("coordinates must be [n,3], got " + diff::shape_str(t.shape()));
  }
  Coords c(t.dim(0));
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int d = 0; d < 3; ++d) c[i][d] = t[i * 3 + d];
  return c;
}

}  // namespace tcat::geom
