#include "odes/order_index.hpp"

#include <algorithm>
#include <string>

#include "odes/error.hpp"
#include "odes/int128.hpp"

namespace odes {

OrderIndex::OrderIndex(std::vector<RecordId> ranks) : ranks_(std::move(ranks)) {
  members_.reserve(ranks_.size());
  for (RecordId rid : ranks_) {
    if (!members_.insert(rid).second)
      fail(ErrorCode::DuplicateRid, "rid " + std::to_string(rid.value) + " appears twice");
  }
}

bool OrderIndex::contains(RecordId rid) const { return members_.contains(rid); }

RecordId OrderIndex::lookup(std::size_t rank) const {
  if (rank >= ranks_.size())
    fail(ErrorCode::RankOutOfBounds,
         "rank " + std::to_string(rank) + " with " + std::to_string(ranks_.size()) + " records");
  return ranks_[rank];
}

std::size_t OrderIndex::rank_of(RecordId rid) const {
  auto it = std::find(ranks_.begin(), ranks_.end(), rid);
  if (it == ranks_.end()) fail(ErrorCode::UnknownRid, "rid " + std::to_string(rid.value));
  return static_cast<std::size_t>(it - ranks_.begin());
}

void OrderIndex::insert_at(std::size_t rank, RecordId rid) {
  if (rank > ranks_.size())
    fail(ErrorCode::RankOutOfBounds,
         "insert at " + std::to_string(rank) + " with " + std::to_string(ranks_.size()) + " records");
  if (members_.contains(rid)) fail(ErrorCode::DuplicateRid, "rid " + std::to_string(rid.value));
  ranks_.insert(ranks_.begin() + static_cast<std::ptrdiff_t>(rank), rid);
  members_.insert(rid);
}

std::size_t OrderIndex::remove(RecordId rid) {
  if (!members_.contains(rid)) fail(ErrorCode::UnknownRid, "rid " + std::to_string(rid.value));
  const std::size_t rank = rank_of(rid);
  ranks_.erase(ranks_.begin() + static_cast<std::ptrdiff_t>(rank));
  members_.erase(rid);
  return rank;
}

std::vector<std::uint8_t> OrderIndex::serialize() const {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(kVersion);
  w.u64(ranks_.size());
  for (RecordId rid : ranks_) w.u64(rid.value);
  return std::move(w).take();
}

OrderIndex OrderIndex::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.expect(std::string_view(kMagic, 4))) fail(ErrorCode::MalformedIndexFile, "bad magic");
  auto version = r.u8();
  if (!version || *version != kVersion) fail(ErrorCode::MalformedIndexFile, "unsupported version");
  auto count = r.u64();
  if (!count) fail(ErrorCode::MalformedIndexFile, "truncated header");
  if (*count != r.remaining() / 8 || r.remaining() % 8 != 0)
    fail(ErrorCode::MalformedIndexFile, "length field " + std::to_string(*count) +
                                            " does not match payload of " +
                                            std::to_string(r.remaining()) + " bytes");
  std::vector<RecordId> ranks;
  ranks.reserve(*count);
  for (std::uint64_t i = 0; i < *count; ++i) ranks.push_back(RecordId{*r.u64()});
  try {
    return OrderIndex(std::move(ranks));
  } catch (const Error& e) {
    fail(ErrorCode::MalformedIndexFile, e.what());
  }
}

}  // namespace odes
