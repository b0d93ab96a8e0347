#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace zslb::io {

// Little-endian raw payloads. Values are moved through their integer image so
// the bytes on disk are independent of host byte order.
template <typename Real, typename Word>
std::string encode_le(std::span<const Real> values) {
  static_assert(sizeof(Real) == sizeof(Word));
  std::string out(values.size() * sizeof(Word), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    Word w = std::bit_cast<Word>(values[i]);
    for (std::size_t b = 0; b < sizeof(Word); ++b) {
      out[i * sizeof(Word) + b] = static_cast<char>((w >> (8 * b)) & 0xFF);
    }
  }
  return out;
}

template <typename Real, typename Word>
std::vector<Real> decode_le(const std::string& bytes) {
  std::vector<Real> out(bytes.size() / sizeof(Word));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Word w = 0;
    for (std::size_t b = 0; b < sizeof(Word); ++b) {
      w |= static_cast<Word>(static_cast<unsigned char>(bytes[i * sizeof(Word) + b])) << (8 * b);
    }
    out[i] = std::bit_cast<Real>(w);
  }
  return out;
}

inline std::string encode_f32(std::span<const float> v) { return encode_le<float, std::uint32_t>(v); }
inline std::string encode_f64(std::span<const double> v) { return encode_le<double, std::uint64_t>(v); }
inline std::vector<float> decode_f32(const std::string& b) { return decode_le<float, std::uint32_t>(b); }
inline std::vector<double> decode_f64(const std::string& b) { return decode_le<double, std::uint64_t>(b); }

inline std::string read_file(const std::filesystem::path& path, ErrorCode missing_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(missing_code, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace zslb::io
