#include "tcm/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

float get_f32(std::istream& is) {
  std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const std::vector<NamedTensor>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kFormatVersion);
  put_u32(os, sizeof(Real) * 8);
  const std::string meta = metadata.dump();
  put_u64(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const NamedTensor& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<std::uint32_t>(p.tensor.ndim()));
    for (std::size_t d : p.tensor.shape()) put_u64(os, d);
    for (Real v : p.tensor.values()) {
      if constexpr (sizeof(Real) == 8) {
        put_f64(os, static_cast<double>(v));
      } else {
        put_f32(os, static_cast<float>(v));
      }
    }
  }
  if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(path.string() + " is not a parameter checkpoint");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t bits = get_u32(is);
  if (bits != 64 && bits != 32) {
    throw IoError("unsupported checkpoint float width " + std::to_string(bits));
  }
  const std::uint64_t meta_len = get_u64(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  const std::uint32_t count = get_u32(is);
  ck.params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t ndim = get_u32(is);
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(get_u64(is));
    std::vector<Real> values(shape_numel(shape));
    for (auto& v : values) {
      v = bits == 64 ? static_cast<Real>(get_f64(is)) : static_cast<Real>(get_f32(is));
    }
    if (!is) throw IoError("truncated checkpoint " + path.string());
    ck.params.push_back({std::move(name), Tensor::from_values(std::move(shape), std::move(values))});
  }
  return ck;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

}  // namespace tcm
