#include "tcat/diff/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "tcat/errors.hpp"

namespace tcat::diff {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

Tensor ParamStore::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor t = Tensor::from(std::move(shape), std::move(init), true);
  entries_.push_back({name, t});
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  return add(name, std::move(shape), std::move(v));
}

Tensor ParamStore::add_zeros(const std::string& name, Shape shape) {
  const std::size_t n = shape_size(shape);
  return add(name, std::move(shape), std::vector<double>(n, 0.0));
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("unknown parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

namespace {

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("truncated checkpoint: " + path.string());
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write("TCAT", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) put<std::uint64_t>(os, d);
    const auto data = e.tensor.data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "TCAT", 4) != 0) {
    throw FormatError("bad checkpoint magic: " + path.string());
  }
  const auto version = take<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = take<std::uint32_t>(is, path);

  std::map<std::string, std::pair<Shape, std::vector<double>>> arrays;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto len = take<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("truncated checkpoint: " + path.string());
    const auto rank = take<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(take<std::uint64_t>(is, path));
    std::vector<double> data(shape_size(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw FormatError("truncated checkpoint: " + path.string());
    }
    arrays[name] = {std::move(shape), std::move(data)};
  }

  if (arrays.size() != params.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(arrays.size()) +
                         " arrays, model expects " + std::to_string(params.size()));
  }
  for (const auto& e : params.entries()) {
    auto it = arrays.find(e.name);
    if (it == arrays.end()) throw DimensionError("checkpoint lacks parameter " + e.name);
    if (it->second.first != e.tensor.shape()) {
      throw DimensionError("checkpoint shape " + shape_str(it->second.first) + " for " +
                           e.name + " does not match model shape " +
                           shape_str(e.tensor.shape()));
    }
  }
  for (auto& e : params.entries()) {
    Tensor t = e.tensor;
    t.leaf_data() = std::move(arrays[e.name].second);
    t.zero_grad();
  }
}

}  // namespace tcat::diff
