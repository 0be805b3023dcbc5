#pragma once

#include <string>
#include <vector>

#include "tcat/diff/params.hpp"
#include "tcat/diff/tensor.hpp"

namespace tcat::diff {

struct Affine {
  Tensor weight;  // [d_in, d_out]
  Tensor bias;    // [d_out]

  std::size_t d_in() const { return weight.dim(0); }
  std::size_t d_out() const { return weight.dim(1); }
};

/// Affine layers with ReLU between them; the last layer stays affine.
struct MLPParams {
  std::vector<Affine> layers;

  std::size_t d_in() const { return layers.front().d_in(); }
  std::size_t d_out() const { return layers.back().d_out(); }
};

// Weights and biases uniform in +-sqrt(1/fan_in). Nonzero biases keep
// pre-activations off the ReLU kink for zero inputs.
Affine make_affine(ParamStore& store, const std::string& name, std::size_t d_in,
                   std::size_t d_out, Rng& rng);

/// dims = {d_in, hidden..., d_out}; layers are named "<prefix>.<i>.W|b".
MLPParams make_mlp(ParamStore& store, const std::string& prefix,
                   const std::vector<std::size_t>& dims, Rng& rng);

/// Applies over the trailing extent of x, which must equal d_in.
Tensor affine_apply(const Affine& layer, const Tensor& x);
Tensor mlp_apply(const MLPParams& mlp, const Tensor& x);

}  // namespace tcat::diff
