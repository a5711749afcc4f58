#include "opinrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace opinrec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nn::Parameters& params,
                     const std::string& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.tensor_count()));
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.value.data()),
             static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint (bad magic)");
  auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.metadata = get_string(is, get<std::uint32_t>(is));
  auto count = get<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = get_string(is, get<std::uint32_t>(is));
    auto ndim = get<std::uint32_t>(is);
    nn::Shape shape(ndim);
    for (auto& d : shape) d = get<std::uint64_t>(is);
    nn::Tensor& t = ck.tensors.add(name, shape);
    is.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint truncated in tensor " + name);
  }
  return ck;
}

void assign_parameters(nn::Parameters& target, const nn::Parameters& source) {
  for (const auto& [name, t] : source) {
    nn::Tensor& dst = target.at(name);
    if (dst.shape != t.shape)
      throw nn::ShapeError("checkpoint tensor " + name + " has shape " + nn::shape_str(t.shape) +
                           ", model expects " + nn::shape_str(dst.shape));
    dst.value = t.value;
  }
}

}  // namespace opinrec
