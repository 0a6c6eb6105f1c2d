#include "odes/random.hpp"

#include "odes/error.hpp"

namespace odes {

namespace {

u128 next_u128(RandomSource& rng) {
  const u128 hi = rng.next_u64();
  const u128 lo = rng.next_u64();
  return (hi << 64) | lo;
}

}  // namespace

i128 RandomSource::uniform(i128 lo, i128 hi) { return draw_uniform(lo, hi); }

i128 RandomSource::draw_uniform(i128 lo, i128 hi) {
  if (lo > hi) fail(ErrorCode::ConfigError, "uniform: empty range");
  const u128 span = static_cast<u128>(hi) - static_cast<u128>(lo);
  if (span == ~u128{0}) return static_cast<i128>(next_u128(*this));
  const u128 range = span + 1;
  // Largest multiple of range that fits; draws above it are rejected.
  const u128 limit = ~u128{0} - (~u128{0} % range) - 1;
  u128 draw;
  if (range <= (u128{1} << 64)) {
    const std::uint64_t r64 = static_cast<std::uint64_t>(range);
    const std::uint64_t lim64 = r64 == 0 ? ~std::uint64_t{0}
                                         : ~std::uint64_t{0} - (~std::uint64_t{0} % r64) - 1;
    std::uint64_t d;
    do {
      d = next_u64();
    } while (r64 != 0 && d > lim64);
    draw = r64 == 0 ? d : d % r64;
  } else {
    do {
      draw = next_u128(*this);
    } while (draw > limit);
    draw %= range;
  }
  return static_cast<i128>(static_cast<u128>(lo) + draw);
}

std::size_t RandomSource::below(std::size_t n) {
  if (n == 0) fail(ErrorCode::ConfigError, "below: n must be positive");
  return static_cast<std::size_t>(draw_uniform(0, static_cast<i128>(n) - 1));
}

std::uint64_t EntropyRandom::next_u64() {
  return (static_cast<std::uint64_t>(device_()) << 32) | device_();
}

i128 ScriptedRandom::uniform(i128 lo, i128 hi) {
  if (uniforms_.empty()) return draw_uniform(lo, hi);
  const i128 v = uniforms_.front();
  uniforms_.pop_front();
  if (v < lo || v > hi) fail(ErrorCode::ConfigError, "scripted value outside requested range");
  return v;
}

std::size_t ScriptedRandom::below(std::size_t n) {
  if (indices_.empty()) return RandomSource::below(n);
  const std::size_t v = indices_.front();
  indices_.pop_front();
  if (v >= n) fail(ErrorCode::ConfigError, "scripted index outside requested range");
  return v;
}

}  // namespace odes
