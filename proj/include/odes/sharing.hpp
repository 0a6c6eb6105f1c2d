#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "odes/int128.hpp"
#include "odes/random.hpp"

namespace odes {

using Share = i128;

enum class Ordering { Less, Equal, Greater };

std::string_view to_string(Ordering o);

// Bounds for the signed, non-modular share domain.
//
//   M  plaintext_bound   |plaintext| <= M
//   σ  mask_bits         masks are uniform over [-B, B], B = M * 2^σ
//   m  share_count       one share per server
//
// Construction rejects any combination where a share (|s| <= m*B + M), a
// local delta (twice that) or a running sum of m deltas could leave the
// signed 128-bit range.
class MaskParams {
 public:
  static constexpr std::int64_t kDefaultBound = 1'000'000'000'000;
  static constexpr unsigned kDefaultMaskBits = 40;
  static constexpr unsigned kDefaultShareCount = 2;

  MaskParams(std::int64_t plaintext_bound, unsigned mask_bits, unsigned share_count);
  MaskParams() : MaskParams(kDefaultBound, kDefaultMaskBits, kDefaultShareCount) {}

  std::int64_t plaintext_bound() const { return bound_; }
  unsigned mask_bits() const { return mask_bits_; }
  unsigned share_count() const { return share_count_; }
  i128 mask_range() const { return mask_range_; }
  i128 share_limit() const { return share_limit_; }
  i128 delta_limit() const { return 2 * share_limit_; }

  bool admits(std::int64_t plaintext) const;
  // Throws BoundExceeded naming the bound.
  void check_plaintext(std::int64_t plaintext) const;

  friend bool operator==(const MaskParams&, const MaskParams&) = default;

 private:
  std::int64_t bound_;
  unsigned mask_bits_;
  unsigned share_count_;
  i128 mask_range_;
  i128 share_limit_;
};

// Position j is destined for server j.
struct ShareVector {
  std::vector<Share> shares;

  std::size_t size() const { return shares.size(); }
  Share operator[](std::size_t j) const { return shares[j]; }
  friend bool operator==(const ShareVector&, const ShareVector&) = default;
};

struct Delta {
  std::uint16_t server_id = 0;
  std::uint64_t round = 0;
  i128 value = 0;

  friend bool operator==(const Delta&, const Delta&) = default;
};

// m-1 uniform masks, one dependent share so the vector sums to pt, then a
// Fisher-Yates shuffle of the positions.
ShareVector share(std::int64_t pt, const MaskParams& params, RandomSource& rng);

std::int64_t reconstruct(const ShareVector& sv, const MaskParams& params);
// Exact sum of an aligned set of shares (one per server).
i128 reconstruct_sum(std::span<const Share> shares);

Delta local_delta(Share own_left, Share own_right, std::uint16_t server_id, std::uint64_t round);

// Sign of the summed deltas. Requires exactly one delta per server id in
// [0, share_count) and a single round.
Ordering aggregate_sign(std::span<const Delta> deltas, std::size_t share_count);

Ordering ordering_of(i128 difference);

}  // namespace odes
