#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odes/messages.hpp"
#include "odes/random.hpp"
#include "odes/sharing.hpp"
#include "odes/transport.hpp"

namespace odes {

struct KeyValue {
  std::string key;
  std::int64_t value = 0;
  friend bool operator==(const KeyValue&, const KeyValue&) = default;
};

struct RankedRecord {
  std::uint64_t rank = 0;
  RecordId rid;
  std::string key;
  std::int64_t value = 0;
  friend bool operator==(const RankedRecord&, const RankedRecord&) = default;
};

struct InsertReceipt {
  RecordId rid;
  std::uint64_t rank = 0;
  std::uint32_t delta_rounds = 0;
};

// Running totals only; these never grow with the number of records.
struct ClientStats {
  std::uint64_t compute_ns = 0;  // sharing and reconstruction
  std::uint64_t delta_rounds = 0;
  std::uint64_t requests = 0;
};

// How query responses from the m servers are lined up before summing.
enum class Alignment { ByRid, Positional };

// Data provider / customer session. Between operations the session keeps
// only its parameters, the transport handle and two counters; no record
// data survives an operation.
class ClientSession {
 public:
  static constexpr std::string_view kMagic = "ODSC";
  static constexpr std::size_t kSerializedSize = 4 + 1 + 8 + 1 + 1 + 8 + 8;

  ClientSession(MaskParams params, ClientTransport& transport, RandomSource& rng);

  const MaskParams& params() const { return params_; }
  std::uint64_t next_rid() const { return next_rid_; }
  const ClientStats& stats() const { return stats_; }
  void set_alignment(Alignment a) { alignment_ = a; }

  // Shares every record, distributes one share per server and broadcasts an
  // index built locally by stable sort. Servers must be empty.
  void init_dataset(std::span<const KeyValue> records);
  InsertReceipt insert_record(std::string_view key, std::int64_t value);
  // Ascending rank order; values are exact.
  std::vector<RankedRecord> query_ranks(const RankPredicate& pred);
  // Sign of (value - record at target_rank); no server state changes.
  Ordering compare_ephemeral(std::int64_t value, std::uint64_t target_rank);
  void delete_record(RecordId rid);
  // Delete then insert under a fresh rid.
  InsertReceipt modify_record(RecordId rid, std::int64_t new_value, std::string_view key);

  // Fixed-size session image (parameters and counters).
  std::vector<std::uint8_t> serialize() const;
  static MaskParams deserialize_params(std::span<const std::uint8_t> bytes);
  void restore_counters(std::span<const std::uint8_t> bytes);

 private:
  // Collects one Ack per server for this request and checks they agree.
  std::vector<Ack> collect_acks(MessageType op, std::uint64_t ref);
  void raise_on_error(const std::vector<Ack>& acks, const char* what);

  MaskParams params_;
  ClientTransport& transport_;
  RandomSource& rng_;
  std::uint64_t next_rid_ = 0;
  std::uint64_t next_request_ = 1;
  ClientStats stats_;
  Alignment alignment_ = Alignment::ByRid;
};

}  // namespace odes
