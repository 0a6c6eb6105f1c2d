#include "odes/int128.hpp"

#include <algorithm>

namespace odes {

std::string to_string(i128 v) {
  if (v == 0) return "0";
  const bool negative = v < 0;
  // Work in the unsigned domain so kI128Min does not overflow on negation.
  u128 mag = negative ? u128(0) - static_cast<u128>(v) : static_cast<u128>(v);
  std::string out;
  while (mag != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
    mag /= 10;
  }
  if (negative) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<i128> parse_i128(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.empty()) return std::nullopt;
  const u128 limit = negative ? static_cast<u128>(kI128Max) + 1 : static_cast<u128>(kI128Max);
  u128 mag = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    const unsigned digit = static_cast<unsigned>(c - '0');
    if (mag > (limit - digit) / 10) return std::nullopt;
    mag = mag * 10 + digit;
  }
  if (negative) return static_cast<i128>(u128(0) - mag);
  return static_cast<i128>(mag);
}

std::optional<i128> checked_add(i128 a, i128 b) {
  i128 out;
  if (__builtin_add_overflow(a, b, &out)) return std::nullopt;
  return out;
}

std::optional<i128> checked_sub(i128 a, i128 b) {
  i128 out;
  if (__builtin_sub_overflow(a, b, &out)) return std::nullopt;
  return out;
}

std::optional<i128> checked_mul(i128 a, i128 b) {
  i128 out;
  if (__builtin_mul_overflow(a, b, &out)) return std::nullopt;
  return out;
}

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) u8(static_cast<std::uint8_t>(v >> shift));
}

void ByteWriter::i128v(i128 v) {
  const auto bits = static_cast<u128>(v);
  u64(static_cast<std::uint64_t>(bits >> 64));
  u64(static_cast<std::uint64_t>(bits));
}

void ByteWriter::bytes(std::span<const std::uint8_t> data) {
  buf_.insert(buf_.end(), data.begin(), data.end());
}

void ByteWriter::raw(std::string_view data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

std::optional<std::uint64_t> ByteReader::read_be(std::size_t width) {
  if (remaining() < width) return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += width;
  return v;
}

std::optional<std::uint8_t> ByteReader::u8() {
  auto v = read_be(1);
  if (!v) return std::nullopt;
  return static_cast<std::uint8_t>(*v);
}

std::optional<std::uint16_t> ByteReader::u16() {
  auto v = read_be(2);
  if (!v) return std::nullopt;
  return static_cast<std::uint16_t>(*v);
}

std::optional<std::uint32_t> ByteReader::u32() {
  auto v = read_be(4);
  if (!v) return std::nullopt;
  return static_cast<std::uint32_t>(*v);
}

std::optional<std::uint64_t> ByteReader::u64() { return read_be(8); }

std::optional<std::int64_t> ByteReader::i64() {
  auto v = read_be(8);
  if (!v) return std::nullopt;
  return static_cast<std::int64_t>(*v);
}

std::optional<i128> ByteReader::i128v() {
  if (remaining() < 16) return std::nullopt;
  const u128 hi = *read_be(8);
  const u128 lo = *read_be(8);
  return static_cast<i128>((hi << 64) | lo);
}

std::optional<std::string> ByteReader::str(std::size_t max_len) {
  auto len = u32();
  if (!len || *len > max_len || remaining() < *len) return std::nullopt;
  std::string out(reinterpret_cast<const char*>(data_.data() + pos_), *len);
  pos_ += *len;
  return out;
}

bool ByteReader::expect(std::string_view magic) {
  if (remaining() < magic.size()) return false;
  if (!std::equal(magic.begin(), magic.end(), data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
    return false;
  pos_ += magic.size();
  return true;
}

}  // namespace odes
