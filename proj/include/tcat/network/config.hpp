#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcat/loss/losses.hpp"

namespace tcat::net {

struct ModelConfig {
  std::size_t n_input = 1024;
  std::vector<std::size_t> level_widths{32, 64, 128, 256};  // one entry per encoder level
  std::vector<double> ball_radii{0.1, 0.2, 0.4, 0.8};
  std::size_t k_neighbors = 16;
  std::size_t n_classes = 17;
  std::size_t m_superpoints = 16;
  std::size_t stem_width = 32;
  std::uint64_t seed = 0;
  loss::TcpLossLevels tcp_loss_levels = loss::TcpLossLevels::all;

  std::size_t levels() const { return level_widths.size(); }
  /// Point count at encoder level i (0 = input), floor(n / 4^i).
  std::size_t level_size(std::size_t i) const;
  /// Throws ValidationError on bad field values and ContractError when the
  /// floor(n/4) chain reaches zero points.
  void validate() const;
};

enum class Optimizer { sgd, momentum, adam };

struct TrainConfig {
  std::size_t epochs = 300;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double momentum = 0.9;
  double lr_decay = 1.0;  // learning rate multiplier applied after every epoch
  std::size_t batch_size = 0;  // samples per update; 0 means the whole set
};

struct ConfigFile {
  ModelConfig model;
  TrainConfig train;
};

/// `key = value` lines; `#` starts a comment; lists are comma separated.
/// Unknown keys and malformed values throw ValidationError naming the line.
ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::filesystem::path& path);
std::string format_config(const ConfigFile& cfg);

const char* to_string(Optimizer o);
/// Throws ValidationError for names other than sgd, momentum and adam.
Optimizer optimizer_from_string(const std::string& name);
const char* to_string(loss::TcpLossLevels l);

}  // namespace tcat::net
