#include "odes/sharing.hpp"

#include <cassert>
#include <string>
#include <utility>

#include "odes/error.hpp"

namespace odes {

std::string_view to_string(Ordering o) {
  switch (o) {
    case Ordering::Less: return "LESS";
    case Ordering::Equal: return "EQUAL";
    case Ordering::Greater: return "GREATER";
  }
  return "?";
}

MaskParams::MaskParams(std::int64_t plaintext_bound, unsigned mask_bits, unsigned share_count)
    : bound_(plaintext_bound), mask_bits_(mask_bits), share_count_(share_count) {
  if (plaintext_bound < 1) fail(ErrorCode::ConfigError, "plaintext bound M must be >= 1");
  if (share_count < 2 || share_count > 16)
    fail(ErrorCode::ConfigError, "share count m must be in [2, 16], got " + std::to_string(share_count));
  if (mask_bits < 1 || mask_bits > 64)
    fail(ErrorCode::ConfigError, "mask bits must be in [1, 64], got " + std::to_string(mask_bits));

  const auto overflow = [&] {
    fail(ErrorCode::ConfigError, "M=" + std::to_string(plaintext_bound) + ", sigma=" +
                                     std::to_string(mask_bits) + ", m=" + std::to_string(share_count) +
                                     " overflows the 128-bit share representation");
  };
  auto b = checked_mul(plaintext_bound, i128{1} << (mask_bits - 1));
  if (b) b = checked_mul(*b, 2);
  if (!b) overflow();
  auto limit = checked_mul(*b, share_count);
  if (limit) limit = checked_add(*limit, plaintext_bound);
  if (!limit) overflow();
  // Running sum of m deltas, each bounded by 2 * limit.
  auto worst_sum = checked_mul(*limit, 2 * static_cast<i128>(share_count));
  if (!worst_sum) overflow();
  mask_range_ = *b;
  share_limit_ = *limit;
}

bool MaskParams::admits(std::int64_t plaintext) const {
  return plaintext >= -bound_ && plaintext <= bound_;
}

void MaskParams::check_plaintext(std::int64_t plaintext) const {
  if (!admits(plaintext))
    fail(ErrorCode::BoundExceeded, "value " + std::to_string(plaintext) +
                                       " exceeds the plaintext bound M=" + std::to_string(bound_));
}

ShareVector share(std::int64_t pt, const MaskParams& params, RandomSource& rng) {
  params.check_plaintext(pt);
  const std::size_t m = params.share_count();
  const i128 b = params.mask_range();

  ShareVector sv;
  sv.shares.resize(m);
  i128 dependent = pt;
  for (std::size_t j = 1; j < m; ++j) {
    sv.shares[j] = rng.uniform(-b, b);
    dependent -= sv.shares[j];
  }
  sv.shares[0] = dependent;
  for (std::size_t i = m - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(sv.shares[i], sv.shares[j]);
  }
#ifndef NDEBUG
  for (Share s : sv.shares) assert(abs128(s) <= params.share_limit());
  assert(reconstruct_sum(sv.shares) == pt);
#endif
  return sv;
}

i128 reconstruct_sum(std::span<const Share> shares) {
  i128 sum = 0;
  for (Share s : shares) {
    auto next = checked_add(sum, s);
    if (!next) fail(ErrorCode::BoundExceeded, "share sum overflows 128 bits");
    sum = *next;
  }
  return sum;
}

std::int64_t reconstruct(const ShareVector& sv, const MaskParams& params) {
  if (sv.size() != params.share_count())
    fail(ErrorCode::LengthMismatch, "expected " + std::to_string(params.share_count()) +
                                        " shares, got " + std::to_string(sv.size()));
  const i128 sum = reconstruct_sum(sv.shares);
  if (sum > std::numeric_limits<std::int64_t>::max() || sum < std::numeric_limits<std::int64_t>::min())
    fail(ErrorCode::BoundExceeded, "reconstructed value " + to_string(sum) + " outside 64-bit range");
  return static_cast<std::int64_t>(sum);
}

Delta local_delta(Share own_left, Share own_right, std::uint16_t server_id, std::uint64_t round) {
  auto diff = checked_sub(own_left, own_right);
  if (!diff) fail(ErrorCode::BoundExceeded, "local delta overflows 128 bits");
  return Delta{server_id, round, *diff};
}

Ordering ordering_of(i128 difference) {
  if (difference < 0) return Ordering::Less;
  if (difference > 0) return Ordering::Greater;
  return Ordering::Equal;
}

Ordering aggregate_sign(std::span<const Delta> deltas, std::size_t share_count) {
  if (deltas.size() < share_count || share_count == 0)
    fail(ErrorCode::MissingDelta, "have " + std::to_string(deltas.size()) + " of " +
                                      std::to_string(share_count) + " deltas");
  std::vector<bool> seen(share_count, false);
  const std::uint64_t round = deltas.front().round;
  i128 sum = 0;
  for (const Delta& d : deltas) {
    if (d.round != round)
      fail(ErrorCode::RoundMismatch, "deltas from rounds " + std::to_string(round) + " and " +
                                         std::to_string(d.round));
    if (d.server_id >= share_count || seen[d.server_id])
      fail(ErrorCode::MissingDelta, "unexpected or repeated delta from server " +
                                        std::to_string(d.server_id));
    seen[d.server_id] = true;
    auto next = checked_add(sum, d.value);
    if (!next) fail(ErrorCode::BoundExceeded, "delta sum overflows 128 bits");
    sum = *next;
  }
  if (deltas.size() != share_count)
    fail(ErrorCode::MissingDelta, "expected exactly one delta per server");
  return ordering_of(sum);
}

}  // namespace odes
