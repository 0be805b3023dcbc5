#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tcat/diff/tensor.hpp"

namespace tcat::diff {

using Rng = std::mt19937_64;

/// Insertion-ordered registry of named trainable leaves.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  Tensor add(const std::string& name, Shape shape, std::vector<double> init);
  Tensor add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

// Flat binary checkpoint: "TCAT", u32 version, u32 array count, then per array
// u32 name length, name bytes, u32 rank, u64 extents, little-endian f64 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);

/// Loads values into an existing store. Every array in the file must exist in
/// the store with an identical shape and vice versa.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params);

}  // namespace tcat::diff
