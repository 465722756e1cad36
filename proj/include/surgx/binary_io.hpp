#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "surgx/error.hpp"
#include "surgx/matrix.hpp"

namespace surgx {

namespace fs = std::filesystem;

inline std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_artifact, "missing file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_file_bytes(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "short write: " + path.string());
}

/// 64-bit FNV-1a, used for provenance fingerprints (not security).
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& update_u64(std::uint64_t v) noexcept {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    return update({buf, 8});
  }
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << state_;
    return os.str();
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fingerprint_of(std::string_view bytes) { return Fnv1a{}.update(bytes).hex(); }

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

}  // namespace detail

/// Serializes floats as raw little-endian IEEE-754 binary32.
inline std::string encode_f32(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = detail::to_little_endian(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(out.data() + 4 * i, &bits, 4);
  }
  return out;
}

inline std::vector<float> decode_f32(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(detail::to_little_endian(bits));
  }
  return out;
}

inline void write_f32bin(const fs::path& path, std::span<const float> values) {
  write_file_bytes(path, encode_f32(values));
}

/// Reads a tensor whose shape is known from the manifest. `entity` names the
/// owning object in error messages. The raw bytes are returned through
/// `raw_out` when provided so callers can fingerprint them.
inline MatrixF read_f32bin(const fs::path& path, std::size_t rows, std::size_t cols,
                           const std::string& entity, std::string* raw_out = nullptr) {
  std::string bytes = read_file_bytes(path);
  const std::size_t expected = rows * cols * 4;
  if (bytes.size() != expected) {
    std::ostringstream os;
    os << "dimension mismatch for " << entity << ": expected " << rows << "x" << cols << " float32 ("
       << expected << " bytes) in " << path.filename().string() << ", found " << bytes.size() << " bytes";
    if (bytes.size() % (4 * std::max<std::size_t>(cols, 1)) == 0 && cols > 0) {
      os << " (" << bytes.size() / (4 * cols) << " rows)";
    }
    fail(ErrorKind::validation, os.str());
  }
  MatrixF m(rows, cols, decode_f32(bytes));
  for (float v : m.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite value in " + entity + " (" + path.filename().string() + ")");
  }
  if (raw_out) *raw_out = std::move(bytes);
  return m;
}

}  // namespace surgx
