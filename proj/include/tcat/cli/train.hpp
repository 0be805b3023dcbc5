#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <vector>

#include "tcat/data/cloud.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/loss/losses.hpp"
#include "tcat/network/config.hpp"
#include "tcat/network/model.hpp"

namespace tcat::cli {

/// Per-parameter first-order update with optional momentum or Adam moments.
class GradientStep {
 public:
  GradientStep(const net::TrainConfig& cfg, const diff::ParamStore& params);
  /// Applies one update using the current leaf gradients times `grad_scale`.
  void apply(diff::ParamStore& params, double lr, double grad_scale);

 private:
  net::TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct TrainResult {
  std::vector<loss::LossBreakdown> epochs;  // mean over samples, each before its own update
  bool aborted = false;                     // a non-finite loss stopped the run
};

/// Each update averages gradients over `batch_size` consecutive samples
/// (all of them by default), in file order. Appends "epoch seg tcp offset
/// total" to `log` before the epoch's last update, writes `best` whenever the
/// epoch total improves and `final_ckpt` at the end. Samples must already hold n_input points.
TrainResult train(net::Model& model, const std::vector<data::LabeledCloud>& samples,
                  const net::TrainConfig& cfg, std::ostream& log,
                  const std::filesystem::path& final_ckpt, const std::filesystem::path& best);

/// Every `*.tcat` file of `dir`, sorted by file name.
std::vector<std::filesystem::path> list_clouds(const std::filesystem::path& dir);

}  // namespace tcat::cli
