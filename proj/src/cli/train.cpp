#include "tcat/cli/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tcat/errors.hpp"

namespace tcat::cli {

GradientStep::GradientStep(const net::TrainConfig& cfg, const diff::ParamStore& params)
    : cfg_(cfg) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.size(), 0.0);
    v_.emplace_back(cfg.optimizer == net::Optimizer::adam ? e.tensor.size() : 0, 0.0);
  }
}

void GradientStep::apply(diff::ParamStore& params, double lr, double grad_scale) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  const auto& entries = params.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    diff::Tensor t = entries[k].tensor;
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    auto& w = t.leaf_data();
    auto& m = m_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * grad_scale;
      switch (cfg_.optimizer) {
        case net::Optimizer::sgd:
          w[i] -= lr * gi;
          break;
        case net::Optimizer::momentum:
          m[i] = cfg_.momentum * m[i] + gi;
          w[i] -= lr * m[i];
          break;
        case net::Optimizer::adam: {
          auto& v = v_[k];
          m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
          v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
          w[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + kEps);
          break;
        }
      }
    }
  }
}

TrainResult train(net::Model& model, const std::vector<data::LabeledCloud>& samples,
                  const net::TrainConfig& cfg, std::ostream& log,
                  const std::filesystem::path& final_ckpt, const std::filesystem::path& best) {
  if (samples.empty()) throw ValidationError("train: no training clouds");
  TrainResult result;
  GradientStep step(cfg, model.params);
  double lr = cfg.learning_rate;
  double best_total = std::numeric_limits<double>::infinity();
  std::size_t last_batch = 0;
  const std::size_t batch =
      cfg.batch_size == 0 ? samples.size() : std::min(cfg.batch_size, samples.size());
  const double inv = 1.0 / static_cast<double>(samples.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    loss::LossBreakdown mean;
    for (std::size_t start = 0; start < samples.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, samples.size());
      model.params.zero_grad();
      for (std::size_t s = start; s < stop; ++s) {
        diff::Tape tape;
        diff::Tensor total;
        loss::LossBreakdown b;
        {
          diff::TapeScope scope(tape);
          std::tie(total, b) = net::sample_loss(model, samples[s]);
        }
        if (!std::isfinite(b.total)) {
          result.aborted = true;
          return result;
        }
        tape.backward(total);
        mean.seg += b.seg * inv;
        mean.tcp += b.tcp * inv;
        mean.offset += b.offset * inv;
      }
      // The epoch's final update runs after logging, so with a full batch the
      // best checkpoint holds the parameters that produced the logged losses.
      if (stop < samples.size()) step.apply(model.params, lr, 1.0 / static_cast<double>(stop - start));
      else last_batch = stop - start;
    }
    mean.total = mean.seg + mean.tcp + mean.offset;
    result.epochs.push_back(mean);

    char line[160];
    std::snprintf(line, sizeof line, "%zu %.17g %.17g %.17g %.17g\n", epoch, mean.seg, mean.tcp,
                  mean.offset, mean.total);
    log << line << std::flush;

    if (mean.total < best_total) {
      best_total = mean.total;
      diff::save_checkpoint(best, model.params);
    }
    step.apply(model.params, lr, 1.0 / static_cast<double>(last_batch));
    lr *= cfg.lr_decay;
  }
  diff::save_checkpoint(final_ckpt, model.params);
  if (cfg.epochs == 0) diff::save_checkpoint(best, model.params);
  return result;
}

std::vector<std::filesystem::path> list_clouds(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".tcat") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tcat::cli
