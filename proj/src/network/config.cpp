#include "tcat/network/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "tcat/dpda/dpda.hpp"
#include "tcat/errors.hpp"

namespace tcat::net {

std::size_t ModelConfig::level_size(std::size_t i) const {
  std::size_t n = n_input;
  for (std::size_t k = 0; k < i; ++k) n /= 4;
  return n;
}

void ModelConfig::validate() const {
  if (level_widths.empty() || level_widths.size() > static_cast<std::size_t>(dpda::kMaxLevel)) {
    throw ValidationError("config: level_widths needs 1.." + std::to_string(dpda::kMaxLevel) +
                          " entries");
  }
  if (ball_radii.size() != level_widths.size()) {
    throw ValidationError("config: ball_radii and level_widths differ in length");
  }
  for (std::size_t w : level_widths) {
    if (w == 0) throw ValidationError("config: level widths must be positive");
  }
  for (double r : ball_radii) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("config: ball radii must be positive");
  }
  if (k_neighbors == 0) throw ValidationError("config: k_neighbors must be positive");
  if (n_classes < 2) throw ValidationError("config: n_classes must be at least 2");
  if (m_superpoints != dpda::kSuperpoints) {
    throw ValidationError("config: m_superpoints is fixed at " + std::to_string(dpda::kSuperpoints));
  }
  if (stem_width == 0) throw ValidationError("config: stem_width must be positive");
  if (level_size(levels()) == 0) {
    throw ContractError("config: n_input " + std::to_string(n_input) + " leaves no points after " +
                        std::to_string(levels()) + " downsampling stages");
  }
}

const char* to_string(Optimizer o) {
  switch (o) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::momentum: return "momentum";
    case Optimizer::adam: return "adam";
  }
  return "?";
}

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "momentum") return Optimizer::momentum;
  if (name == "adam") return Optimizer::adam;
  throw ValidationError("optimizer must be 'sgd', 'momentum' or 'adam', got '" + name + "'");
}

const char* to_string(loss::TcpLossLevels l) {
  return l == loss::TcpLossLevels::all ? "all" : "last";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  throw ValidationError("config line " + std::to_string(line) + ": " + what);
}

template <typename T>
T number(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    bad(line, "malformed number '" + std::string(tok) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) bad(line, "non-finite number");
  }
  return v;
}

template <typename T>
std::vector<T> number_list(std::string_view value, std::size_t line) {
  std::vector<T> out;
  while (true) {
    const std::size_t comma = value.find(',');
    out.push_back(number<T>(value.substr(0, comma), line));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

ConfigFile parse_config(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) bad(line, "expected 'key = value'");
    const std::string key(trim(s.substr(0, eq)));
    const std::string_view value = trim(s.substr(eq + 1));
    if (value.empty()) bad(line, "empty value for '" + key + "'");

    auto& m = cfg.model;
    auto& t = cfg.train;
    if (key == "n_input") m.n_input = number<std::size_t>(value, line);
    else if (key == "level_widths") m.level_widths = number_list<std::size_t>(value, line);
    else if (key == "ball_radii") m.ball_radii = number_list<double>(value, line);
    else if (key == "k_neighbors") m.k_neighbors = number<std::size_t>(value, line);
    else if (key == "n_classes") m.n_classes = number<std::size_t>(value, line);
    else if (key == "m_superpoints") m.m_superpoints = number<std::size_t>(value, line);
    else if (key == "stem_width") m.stem_width = number<std::size_t>(value, line);
    else if (key == "seed") m.seed = number<std::uint64_t>(value, line);
    else if (key == "tcp_loss_levels") {
      if (value == "all") m.tcp_loss_levels = loss::TcpLossLevels::all;
      else if (value == "last") m.tcp_loss_levels = loss::TcpLossLevels::last;
      else bad(line, "tcp_loss_levels must be 'all' or 'last'");
    } else if (key == "epochs") t.epochs = number<std::size_t>(value, line);
    else if (key == "learning_rate") t.learning_rate = number<double>(value, line);
    else if (key == "momentum") t.momentum = number<double>(value, line);
    else if (key == "lr_decay") t.lr_decay = number<double>(value, line);
    else if (key == "batch_size") t.batch_size = number<std::size_t>(value, line);
    else if (key == "optimizer") {
      try {
        t.optimizer = optimizer_from_string(std::string(value));
      } catch (const ValidationError& e) {
        bad(line, e.what());
      }
    } else {
      bad(line, "unknown key '" + key + "'");
    }
  }
  if (!(cfg.train.learning_rate > 0.0)) throw ValidationError("config: learning_rate must be positive");
  if (!(cfg.train.lr_decay > 0.0)) throw ValidationError("config: lr_decay must be positive");
  if (!(cfg.train.momentum >= 0.0 && cfg.train.momentum < 1.0)) {
    throw ValidationError("config: momentum must be in [0,1)");
  }
  cfg.model.validate();
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ConfigFile& cfg) {
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  auto join = [](const auto& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out += ",";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(xs[i]));
      out += buf;
    }
    return out;
  };
  char lr[32], mom[32], decay[32];
  std::snprintf(lr, sizeof lr, "%.17g", t.learning_rate);
  std::snprintf(mom, sizeof mom, "%.17g", t.momentum);
  std::snprintf(decay, sizeof decay, "%.17g", t.lr_decay);
  std::string out;
  out += "n_input = " + std::to_string(m.n_input) + "\n";
  out += "level_widths = " + join(m.level_widths) + "\n";
  out += "ball_radii = " + join(m.ball_radii) + "\n";
  out += "k_neighbors = " + std::to_string(m.k_neighbors) + "\n";
  out += "n_classes = " + std::to_string(m.n_classes) + "\n";
  out += "m_superpoints = " + std::to_string(m.m_superpoints) + "\n";
  out += "stem_width = " + std::to_string(m.stem_width) + "\n";
  out += "seed = " + std::to_string(m.seed) + "\n";
  out += std::string("tcp_loss_levels = ") + to_string(m.tcp_loss_levels) + "\n";
  out += "epochs = " + std::to_string(t.epochs) + "\n";
  out += std::string("learning_rate = ") + lr + "\n";
  out += std::string("optimizer = ") + to_string(t.optimizer) + "\n";
  out += std::string("momentum = ") + mom + "\n";
  out += std::string("lr_decay = ") + decay + "\n";
  out += "batch_size = " + std::to_string(t.batch_size) + "\n";
  return out;
}

}  // namespace tcat::net
