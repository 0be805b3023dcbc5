#include "tcat/diff/mlp.hpp"

#include <cmath>

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::diff {

Affine make_affine(ParamStore& store, const std::string& name, std::size_t d_in,
                   std::size_t d_out, Rng& rng) {
  Affine a;
  const double bound = std::sqrt(1.0 / static_cast<double>(d_in));
  a.weight = store.add_uniform(name + ".W", {d_in, d_out}, bound, rng);
  a.bias = store.add_uniform(name + ".b", {d_out}, bound, rng);
  return a;
}

MLPParams make_mlp(ParamStore& store, const std::string& prefix,
                   const std::vector<std::size_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw ContractError("make_mlp needs at least input and output widths");
  MLPParams mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    mlp.layers.push_back(
        make_affine(store, prefix + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return mlp;
}

Tensor affine_apply(const Affine& layer, const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() != layer.d_in()) {
    throw DimensionError("affine: input " + shape_str(x.shape()) +
                         " has trailing extent != " + std::to_string(layer.d_in()));
  }
  const std::size_t rows = x.size() / layer.d_in();
  Tensor flat = x.rank() == 2 ? x : reshape(x, {rows, layer.d_in()});
  Tensor y = add(matmul(flat, layer.weight), layer.bias);
  if (x.rank() == 2) return y;
  Shape shape = x.shape();
  shape.back() = layer.d_out();
  return reshape(y, std::move(shape));
}

Tensor mlp_apply(const MLPParams& mlp, const Tensor& x) {
  if (mlp.layers.empty()) throw ContractError("mlp_apply on an empty MLP");
  Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = affine_apply(mlp.layers[i], h);
    if (i + 1 < mlp.layers.size()) h = relu(h);
  }
  return h;
}

}  // namespace tcat::diff
