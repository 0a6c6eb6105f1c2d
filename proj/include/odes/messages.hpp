#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "odes/order_index.hpp"
#include "odes/sharing.hpp"

namespace odes {

// Order predicate over ranks, evaluated identically by every server.
class RankPredicate {
 public:
  enum class Kind : std::uint8_t { RangeByRank = 1, TopK = 2, BottomK = 3, All = 4 };

  static RankPredicate range(std::uint64_t lo, std::uint64_t hi);
  static RankPredicate top_k(std::uint64_t k);
  static RankPredicate bottom_k(std::uint64_t k);
  static RankPredicate all();

  Kind kind() const { return kind_; }
  std::uint64_t first() const { return a_; }
  std::uint64_t second() const { return b_; }

  // Half-open rank window [begin, end) selected out of n records.
  std::pair<std::size_t, std::size_t> window(std::size_t n) const;
  bool matches(std::size_t rank, std::size_t n) const;

  friend bool operator==(const RankPredicate&, const RankPredicate&) = default;

 private:
  RankPredicate(Kind kind, std::uint64_t a, std::uint64_t b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_;
  std::uint64_t a_;
  std::uint64_t b_;
};

enum class MessageType : std::uint8_t {
  StoreShare = 0x01,
  BeginInsert = 0x02,
  DeltaBroadcast = 0x03,
  QueryRequest = 0x04,
  QueryResponse = 0x05,
  DeleteRecord = 0x06,
  IndexSnapshot = 0x07,
  Ack = 0x08,
  CompareProbe = 0x09,
};

enum class AckStatus : std::uint8_t {
  Ok = 0,
  DuplicateRid = 1,
  UnknownRid = 2,
  RankOutOfBounds = 3,
  MalformedIndex = 4,
  Timeout = 5,
  MalformedMessage = 6,
};

struct StoreShare {
  RecordId rid;
  std::string key;
  Share share = 0;
  friend bool operator==(const StoreShare&, const StoreShare&) = default;
};

struct BeginInsert {
  RecordId rid;
  std::string key;
  Share share = 0;
  friend bool operator==(const BeginInsert&, const BeginInsert&) = default;
};

struct DeltaBroadcast {
  Delta delta;
  friend bool operator==(const DeltaBroadcast&, const DeltaBroadcast&) = default;
};

struct QueryRequest {
  std::uint64_t query_id = 0;
  RankPredicate predicate = RankPredicate::all();
  friend bool operator==(const QueryRequest&, const QueryRequest&) = default;
};

struct QueryRow {
  std::uint64_t rank = 0;
  RecordId rid;
  std::string key;
  Share share = 0;
  friend bool operator==(const QueryRow&, const QueryRow&) = default;
};

// Sent only to the client.
struct QueryResponse {
  std::uint64_t query_id = 0;
  std::vector<QueryRow> rows;
  friend bool operator==(const QueryResponse&, const QueryResponse&) = default;
};

struct DeleteRecord {
  RecordId rid;
  friend bool operator==(const DeleteRecord&, const DeleteRecord&) = default;
};

struct IndexSnapshot {
  std::vector<std::uint8_t> bytes;
  friend bool operator==(const IndexSnapshot&, const IndexSnapshot&) = default;
};

// Completion report for one client request. `ref` is the rid (store,
// insert, delete) or probe id (compare); `result` is the assigned rank for
// inserts and -1/0/1 for compares; `rounds` counts delta rounds spent.
struct Ack {
  MessageType op = MessageType::Ack;
  std::uint64_t ref = 0;
  AckStatus status = AckStatus::Ok;
  std::int64_t result = 0;
  std::uint32_t rounds = 0;
  friend bool operator==(const Ack&, const Ack&) = default;
};

// One delta round of the insert machinery without any index update.
struct CompareProbe {
  std::uint64_t probe_id = 0;
  std::uint64_t target_rank = 0;
  Share share = 0;
  friend bool operator==(const CompareProbe&, const CompareProbe&) = default;
};

using ServerMessage = std::variant<StoreShare, BeginInsert, DeltaBroadcast, QueryRequest, QueryResponse,
                                   DeleteRecord, IndexSnapshot, Ack, CompareProbe>;

MessageType type_of(const ServerMessage& msg);
std::string_view to_string(MessageType t);

// Type byte followed by big-endian fields; shares as 16-byte two's complement.
std::vector<std::uint8_t> encode(const ServerMessage& msg);
ServerMessage decode(std::span<const std::uint8_t> bytes);

}  // namespace odes
