#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <unordered_set>
#include <vector>

namespace odes {

struct RecordId {
  std::uint64_t value = 0;

  friend auto operator<=>(const RecordId&, const RecordId&) = default;
};

// Rank -> record id, replicated verbatim on every server. Position k holds
// the record with the k-th smallest plaintext. Contiguous storage with
// shift-on-insert; O(n) per mutation.
class OrderIndex {
 public:
  static constexpr char kMagic[] = "ODSI";
  static constexpr std::uint8_t kVersion = 0x01;

  OrderIndex() = default;
  explicit OrderIndex(std::vector<RecordId> ranks);

  std::size_t size() const { return ranks_.size(); }
  bool empty() const { return ranks_.empty(); }
  bool contains(RecordId rid) const;

  RecordId lookup(std::size_t rank) const;
  // Rank currently held by rid; UnknownRid if absent. O(n).
  std::size_t rank_of(RecordId rid) const;

  void insert_at(std::size_t rank, RecordId rid);
  // Returns the rank the record held.
  std::size_t remove(RecordId rid);

  std::span<const RecordId> ranks() const { return ranks_; }

  std::vector<std::uint8_t> serialize() const;
  static OrderIndex deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const OrderIndex& a, const OrderIndex& b) { return a.ranks_ == b.ranks_; }

 private:
  struct RidHash {
    std::size_t operator()(RecordId r) const { return std::hash<std::uint64_t>{}(r.value); }
  };

  std::vector<RecordId> ranks_;
  std::unordered_set<RecordId, RidHash> members_;
};

}  // namespace odes
