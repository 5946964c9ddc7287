#pragma once

// Binary tensor container.
//
// Layout (all integers and floats little-endian):
//   magic    8 bytes   "GLSTENSR" for real tensors, "GLSMASK1" for boolean masks
//   version  u64       currently 1
//   order    u64       N
//   extents  N x u64
//   values   prod(extents) x f64 (real) or x u8 (mask, 0/1), canonical layout
//
// Every container has a JSON sidecar at "<path>.json" holding mode names,
// units and provenance. The sidecar is advisory; the binary is self-describing.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gloss/error.hpp"
#include "gloss/tensor.hpp"

namespace gloss {

inline constexpr std::uint64_t kContainerVersion = 1;
inline constexpr std::array<char, 8> kTensorMagic{'G', 'L', 'S', 'T', 'E', 'N', 'S', 'R'};
inline constexpr std::array<char, 8> kMaskMagic{'G', 'L', 'S', 'M', 'A', 'S', 'K', '1'};

struct TensorMetadata {
  std::vector<std::string> mode_names;
  std::string units;
  nlohmann::json provenance = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const TensorMetadata& m) {
  j = nlohmann::json{{"mode_names", m.mode_names}, {"units", m.units}, {"provenance", m.provenance}};
}

inline void from_json(const nlohmann::json& j, TensorMetadata& m) {
  m.mode_names = j.value("mode_names", std::vector<std::string>{});
  m.units = j.value("units", std::string{});
  m.provenance = j.value("provenance", nlohmann::json::object());
}

// Default names for the hour x day-of-week x week x zone layout.
inline std::vector<std::string> default_mode_names(int order) {
  if (order == 4) return {"hour", "day_of_week", "week", "zone"};
  std::vector<std::string> names;
  for (int n = 0; n < order; ++n) names.push_back("mode" + std::to_string(n));
  return names;
}

namespace detail {

template <class T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(bytes.data(), bytes.size());
}

template <class T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorKind::io, "read failed for " + path.string());
  return data;
}

inline std::string header_bytes(const std::array<char, 8>& magic, const Shape& shape) {
  std::string buf(magic.data(), magic.size());
  put_le<std::uint64_t>(buf, kContainerVersion);
  put_le<std::uint64_t>(buf, shape.size());
  for (Index e : shape) put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(e));
  return buf;
}

inline Shape parse_header(const std::string& bytes, const std::array<char, 8>& magic, std::size_t& pos,
                          const std::string& what) {
  require(bytes.size() >= 24, ErrorKind::io, what + ": truncated header");
  require(std::equal(magic.begin(), magic.end(), bytes.begin()), ErrorKind::io, what + ": bad magic bytes");
  const auto version = get_le<std::uint64_t>(bytes.data() + 8);
  require(version == kContainerVersion, ErrorKind::io, what + ": unsupported version " + std::to_string(version));
  const auto order = get_le<std::uint64_t>(bytes.data() + 16);
  require(order >= 1 && order <= 64, ErrorKind::io, what + ": implausible order " + std::to_string(order));
  pos = 24;
  require(bytes.size() >= pos + 8 * order, ErrorKind::io, what + ": truncated extents");
  Shape shape(order);
  for (auto& e : shape) {
    const auto v = get_le<std::uint64_t>(bytes.data() + pos);
    require(v >= 1 && v < (1ULL << 40), ErrorKind::io, what + ": invalid extent");
    e = static_cast<Index>(v);
    pos += 8;
  }
  return shape;
}

}  // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

// Writes `contents` to a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(out), ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    detail::require(static_cast<bool>(out), ErrorKind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  detail::require(!ec, ErrorKind::io, "rename to " + path.string() + " failed: " + ec.message());
}

inline std::string encode_tensor(const DenseTensor& t) {
  std::string buf = detail::header_bytes(kTensorMagic, t.shape());
  buf.reserve(buf.size() + 8 * static_cast<std::size_t>(t.size()));
  for (double v : t.values()) detail::put_le<double>(buf, v);
  return buf;
}

inline DenseTensor decode_tensor(const std::string& bytes, const std::string& what = "tensor") {
  std::size_t pos = 0;
  Shape shape = detail::parse_header(bytes, kTensorMagic, pos, what);
  const auto n = static_cast<std::size_t>(shape_size(shape));
  detail::require(bytes.size() == pos + 8 * n, ErrorKind::io, what + ": payload size does not match extents");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = detail::get_le<double>(bytes.data() + pos + 8 * i);
  return DenseTensor(std::move(shape), std::move(values));
}

inline std::string encode_mask(const BoolTensor& t) {
  std::string buf = detail::header_bytes(kMaskMagic, t.shape());
  for (auto v : t.values()) buf.push_back(v ? '\1' : '\0');
  return buf;
}

inline BoolTensor decode_mask(const std::string& bytes, const std::string& what = "mask") {
  std::size_t pos = 0;
  Shape shape = detail::parse_header(bytes, kMaskMagic, pos, what);
  const auto n = static_cast<std::size_t>(shape_size(shape));
  detail::require(bytes.size() == pos + n, ErrorKind::io, what + ": payload size does not match extents");
  std::vector<std::uint8_t> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[pos + i]);
    detail::require(b <= 1, ErrorKind::io, what + ": mask bytes must be 0 or 1");
    values[i] = b;
  }
  return BoolTensor(std::move(shape), std::move(values));
}

inline void write_sidecar(const std::filesystem::path& path, const Shape& shape, std::string_view kind,
                          const TensorMetadata& meta) {
  nlohmann::json j = meta;
  if (meta.mode_names.empty()) j["mode_names"] = default_mode_names(static_cast<int>(shape.size()));
  j["format"] = "gloss-tensor";
  j["version"] = kContainerVersion;
  j["kind"] = kind;
  j["shape"] = shape;
  write_atomic(sidecar_path(path), j.dump(2) + "\n");
}

inline void save_tensor(const std::filesystem::path& path, const DenseTensor& t, const TensorMetadata& meta = {}) {
  write_atomic(path, encode_tensor(t));
  write_sidecar(path, t.shape(), "f64", meta);
}

inline void save_mask(const std::filesystem::path& path, const BoolTensor& t, const TensorMetadata& meta = {}) {
  write_atomic(path, encode_mask(t));
  write_sidecar(path, t.shape(), "bool", meta);
}

inline DenseTensor load_tensor(const std::filesystem::path& path) {
  return decode_tensor(detail::read_file(path), path.string());
}

inline BoolTensor load_mask(const std::filesystem::path& path) {
  return decode_mask(detail::read_file(path), path.string());
}

// Missing sidecars yield default metadata.
inline TensorMetadata load_metadata(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) return {};
  try {
    return nlohmann::json::parse(detail::read_file(side)).get<TensorMetadata>();
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorKind::io, side.string() + ": " + e.what());
  }
}

}  // namespace gloss
