#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace odes {

using i128 = __int128;
using u128 = unsigned __int128;

inline constexpr i128 kI128Max = static_cast<i128>(~u128{0} >> 1);
inline constexpr i128 kI128Min = -kI128Max - 1;

inline constexpr i128 abs128(i128 v) { return v < 0 ? -v : v; }

std::string to_string(i128 v);
std::optional<i128> parse_i128(std::string_view text);

// Checked arithmetic; nullopt on signed-128 overflow.
std::optional<i128> checked_add(i128 a, i128 b);
std::optional<i128> checked_sub(i128 a, i128 b);
std::optional<i128> checked_mul(i128 a, i128 b);

// Big-endian, fixed-width serialization used by every on-disk and on-wire
// format in the project.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void i128v(i128 v);
  void bytes(std::span<const std::uint8_t> data);
  void raw(std::string_view data);
  // u32 length prefix followed by the bytes.
  void str(std::string_view s);

  const std::vector<std::uint8_t>& data() const& { return buf_; }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

// Reads never run past the end; a short read returns nullopt/false and the
// caller chooses the error code that fits its format.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::optional<std::uint8_t> u8();
  std::optional<std::uint16_t> u16();
  std::optional<std::uint32_t> u32();
  std::optional<std::uint64_t> u64();
  std::optional<std::int64_t> i64();
  std::optional<i128> i128v();
  std::optional<std::string> str(std::size_t max_len = 1u << 20);
  bool expect(std::string_view magic);

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::optional<std::uint64_t> read_be(std::size_t width);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace odes
