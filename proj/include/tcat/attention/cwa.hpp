#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tcat/diff/mlp.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/diff/tensor.hpp"
#include "tcat/geom/geom.hpp"

// Channel-wise (vector) attention between a query set and a key set:
//
//   C(q,k) = softmax_k( w_gate( (f_q - f_k) + w_pos(x_q - x_k) ) )   per channel
//   f_q'   = sum_k C(q,k) * (f_q - f_k)
namespace tcat::attn {

struct CWAParams {
  diff::MLPParams w_pos;   // R^3 -> R^C
  diff::MLPParams w_gate;  // R^C -> R^C
  std::size_t width = 0;
};

/// Two-layer branches with hidden width C, registered under `prefix`.
CWAParams make_cwa(diff::ParamStore& store, const std::string& prefix, std::size_t width,
                   diff::Rng& rng);

struct PointSet {
  diff::Tensor X;  // [n,3]; may carry grad (superpoint positions)
  diff::Tensor F;  // [n,C]

  std::size_t size() const { return X.dim(0); }
  std::size_t width() const { return F.dim(1); }
};

PointSet make_point_set(diff::Tensor X, diff::Tensor F);

/// Flattened (query, key) pairs grouped by query: pairs of query q occupy
/// [offsets[q], offsets[q+1]).
struct PairList {
  std::vector<std::size_t> query;
  std::vector<std::size_t> key;
  std::vector<std::size_t> offsets;
};

PairList dense_pairs(std::size_t n_queries, std::size_t n_keys);

/// Pairs from a neighbor table with repeated indices in a row collapsed to
/// their first occurrence.
PairList neighbor_pairs(const geom::NeighborTable& table, std::size_t n_keys);

/// Attention weights for every pair, shape [pairs, C].
diff::Tensor cwa_pair_weights(const CWAParams& params, const PointSet& queries,
                              const PointSet& keys, const PairList& pairs);

/// Weights between one query (position, feature row [C]) and all keys: [k, C].
diff::Tensor cwa_weights(const CWAParams& params, const geom::Point3& query_x,
                         const diff::Tensor& query_f, const PointSet& keys);

diff::Tensor cwa_update(const CWAParams& params, const PointSet& queries,
                        const PointSet& keys);

diff::Tensor cwa_update_masked(const CWAParams& params, const PointSet& queries,
                               const PointSet& keys, const geom::NeighborTable& neighbors);

/// Shared core: per-pair weights applied to (f_q - f_k), summed per query.
diff::Tensor cwa_attend(const CWAParams& params, const PointSet& queries,
                        const PointSet& keys, const PairList& pairs);

}  // namespace tcat::attn
