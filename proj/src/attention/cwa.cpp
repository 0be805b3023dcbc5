#include "tcat/attention/cwa.hpp"

#include <algorithm>

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::attn {

using diff::Tensor;

CWAParams make_cwa(diff::ParamStore& store, const std::string& prefix, std::size_t width,
                   diff::Rng& rng) {
  CWAParams p;
  p.width = width;
  p.w_pos = diff::make_mlp(store, prefix + ".pos", {3, width, width}, rng);
  p.w_gate = diff::make_mlp(store, prefix + ".gate", {width, width, width}, rng);
  return p;
}

PointSet make_point_set(Tensor X, Tensor F) {
  if (X.rank() != 2 || X.dim(1) != 3 || F.rank() != 2 || X.dim(0) != F.dim(0)) {
    throw DimensionError("point set needs X [n,3] and F [n,C], got " +
                         diff::shape_str(X.shape()) + " and " + diff::shape_str(F.shape()));
  }
  return {std::move(X), std::move(F)};
}

PairList dense_pairs(std::size_t n_queries, std::size_t n_keys) {
  PairList p;
  p.query.reserve(n_queries * n_keys);
  p.key.reserve(n_queries * n_keys);
  p.offsets.reserve(n_queries + 1);
  p.offsets.push_back(0);
  for (std::size_t q = 0; q < n_queries; ++q) {
    for (std::size_t k = 0; k < n_keys; ++k) {
      p.query.push_back(q);
      p.key.push_back(k);
    }
    p.offsets.push_back(p.key.size());
  }
  return p;
}

PairList neighbor_pairs(const geom::NeighborTable& table, std::size_t n_keys) {
  PairList p;
  p.offsets.push_back(0);
  std::vector<std::size_t> seen;
  for (std::size_t q = 0; q < table.queries(); ++q) {
    seen.clear();
    for (std::size_t k : table.row(q)) {
      if (k >= n_keys) {
        throw IndexError("neighbor index " + std::to_string(k) + " out of range for " +
                         std::to_string(n_keys) + " keys");
      }
      if (std::find(seen.begin(), seen.end(), k) != seen.end()) continue;
      seen.push_back(k);
      p.query.push_back(q);
      p.key.push_back(k);
    }
    p.offsets.push_back(p.key.size());
  }
  return p;
}

namespace {

void check_widths(const CWAParams& params, const PointSet& queries, const PointSet& keys) {
  if (queries.width() != params.width || keys.width() != params.width) {
    throw DimensionError("cwa: query width " + std::to_string(queries.width()) +
                         " and key width " + std::to_string(keys.width()) +
                         " must both equal " + std::to_string(params.width));
  }
  if (keys.size() == 0) throw SizeError("cwa: empty key set");
}

struct PairTerms {
  Tensor delta;    // f_q - f_k per pair
  Tensor weights;  // softmax over each query's pairs
};

PairTerms pair_terms(const CWAParams& params, const PointSet& queries, const PointSet& keys,
                     const PairList& pairs) {
  check_widths(params, queries, keys);
  const Tensor fq = diff::gather(queries.F, 0, pairs.query);
  const Tensor fk = diff::gather(keys.F, 0, pairs.key);
  const Tensor xq = diff::gather(queries.X, 0, pairs.query);
  const Tensor xk = diff::gather(keys.X, 0, pairs.key);
  Tensor delta = diff::sub(fq, fk);
  const Tensor pos = diff::mlp_apply(params.w_pos, diff::sub(xq, xk));
  const Tensor logits = diff::mlp_apply(params.w_gate, diff::add(delta, pos));
  return {std::move(delta), diff::segment_softmax(logits, pairs.offsets)};
}

}  // namespace

Tensor cwa_pair_weights(const CWAParams& params, const PointSet& queries, const PointSet& keys,
                        const PairList& pairs) {
  return pair_terms(params, queries, keys, pairs).weights;
}

Tensor cwa_weights(const CWAParams& params, const geom::Point3& query_x, const Tensor& query_f,
                   const PointSet& keys) {
  const PointSet q = make_point_set(Tensor::from({1, 3}, {query_x[0], query_x[1], query_x[2]}),
                                    diff::reshape(query_f, {1, query_f.size()}));
  return cwa_pair_weights(params, q, keys, dense_pairs(1, keys.size()));
}

Tensor cwa_attend(const CWAParams& params, const PointSet& queries, const PointSet& keys,
                  const PairList& pairs) {
  const PairTerms t = pair_terms(params, queries, keys, pairs);
  return diff::scatter_add(diff::mul(t.weights, t.delta), 0, pairs.query, queries.size());
}

Tensor cwa_update(const CWAParams& params, const PointSet& queries, const PointSet& keys) {
  check_widths(params, queries, keys);
  return cwa_attend(params, queries, keys, dense_pairs(queries.size(), keys.size()));
}

Tensor cwa_update_masked(const CWAParams& params, const PointSet& queries, const PointSet& keys,
                         const geom::NeighborTable& neighbors) {
  check_widths(params, queries, keys);
  if (neighbors.queries() != queries.size()) {
    throw DimensionError("cwa_update_masked: neighbor table covers " +
                         std::to_string(neighbors.queries()) + " queries, expected " +
                         std::to_string(queries.size()));
  }
  return cwa_attend(params, queries, keys, neighbor_pairs(neighbors, keys.size()));
}

}  // namespace tcat::attn
