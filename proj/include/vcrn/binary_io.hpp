#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vcrn/error.hpp"

namespace vcrn::io {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

/// Append-only little-endian encoder.
class Writer {
 public:
  template <class T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    buf_.insert(buf_.end(), bytes, bytes + sizeof(T));
  }
  void put_u32(std::uint32_t v) { put(v); }
  void put_u64(std::uint64_t v) { put(v); }
  void put_f32(float v) { put(v); }
  void put_f64(double v) { put(v); }
  void put_raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  /// u32 length followed by the bytes.
  void put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_raw(s);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked little-endian decoder over an in-memory file image.
class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    require(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::uint32_t get_u32() { return get<std::uint32_t>(); }
  std::uint64_t get_u64() { return get<std::uint64_t>(); }
  float get_f32() { return get<float>(); }
  double get_f64() { return get<double>(); }
  std::string get_raw(std::size_t n) {
    require(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string get_string() { return get_raw(get_u32()); }

  void expect_magic(std::string_view magic) {
    if (bytes_.size() < magic.size() ||
        std::string_view(bytes_.data(), magic.size()) != magic) {
      throw ParseError(ParseError::Reason::kBadMagic,
                       what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ = magic.size();
  }
  void expect_version(std::uint32_t want) {
    const std::uint32_t got = get_u32();
    if (got != want) {
      throw ParseError(ParseError::Reason::kVersion,
                       what_ + ": unsupported version " + std::to_string(got) + " (expected " +
                           std::to_string(want) + ")");
    }
  }
  /// The rest of the file must be exactly `n` bytes.
  void expect_remaining(std::uint64_t n) const {
    if (remaining() != n) {
      throw ParseError(ParseError::Reason::kTruncated,
                       what_ + ": header announces " + std::to_string(n) +
                           " payload bytes but " + std::to_string(remaining()) + " remain");
    }
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(ParseError::Reason::kTruncated, what_ + ": truncated file");
    }
  }

  const std::vector<char>& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace vcrn::io
