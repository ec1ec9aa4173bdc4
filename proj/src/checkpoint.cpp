#include "perin/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "perin/error.hpp"

namespace perin {

namespace {

constexpr char kMagic[8] = {'P', 'E', 'R', 'I', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw DataError("checkpoint " + path + ": truncated");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) put_le<double>(out, p->value(r, c));
    }
  }
  if (!out) throw DataError("cannot write checkpoint " + path);
}

void load_checkpoint(const std::string& path, ParamList& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint " + path + ": bad magic");
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  std::map<std::string, Matrix> arrays;
  const auto count = get_le<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto length = get_le<std::uint32_t>(in, path);
    std::string name(length, '\0');
    if (!in.read(name.data(), length)) throw DataError("checkpoint " + path + ": truncated");
    const auto rows = get_le<std::uint32_t>(in, path);
    const auto cols = get_le<std::uint32_t>(in, path);
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get_le<double>(in, path);
    }
    arrays[name] = std::move(m);
  }
  for (auto& [name, p] : params) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw DataError("checkpoint " + path + ": missing array " + name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw DataError("checkpoint " + path + ": shape mismatch for " + name);
    }
    p->value = it->second;
  }
}

}  // namespace perin
