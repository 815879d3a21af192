#pragma once

// Little-endian encode/decode helpers shared by the binary artifact formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace embprobe::detail {

class ByteWriter {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void reserve(std::size_t n) { out_.reserve(n); }

  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string out_;
};

// Reads fail by returning false; callers decide which error to raise.
class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

  bool bytes(std::size_t n, std::string_view& out) {
    if (remaining() < n) return false;
    out = in_.substr(pos_, n);
    pos_ += n;
    return true;
  }
  bool u16(std::uint16_t& v) { return get(v); }
  bool u32(std::uint32_t& v) { return get(v); }
  bool u64(std::uint64_t& v) { return get(v); }
  bool f32(float& v) {
    std::uint32_t bits = 0;
    if (!get(bits)) return false;
    v = std::bit_cast<float>(bits);
    return true;
  }
  bool f64(double& v) {
    std::uint64_t bits = 0;
    if (!get(bits)) return false;
    v = std::bit_cast<double>(bits);
    return true;
  }

 private:
  template <typename T>
  bool get(T& v) {
    if (remaining() < sizeof(T)) return false;
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      acc |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    v = static_cast<T>(acc);
    pos_ += sizeof(T);
    return true;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace embprobe::detail
