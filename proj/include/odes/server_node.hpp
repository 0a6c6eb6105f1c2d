#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "odes/messages.hpp"
#include "odes/order_index.hpp"
#include "odes/round_barrier.hpp"
#include "odes/sharing.hpp"
#include "odes/transport.hpp"

namespace odes {

struct StoredShare {
  std::string key;
  Share share = 0;
  friend bool operator==(const StoredShare&, const StoredShare&) = default;
};

// One server's private data. The share table never appears in any message
// to another server.
struct ServerState {
  NodeId server_id = 0;
  MaskParams params;
  std::map<RecordId, StoredShare> share_table;
  OrderIndex index_replica;
  // Deleted rids; a rid is never accepted twice.
  std::set<RecordId> retired;
  std::uint64_t round_counter = 0;

  ServerState() = default;
  ServerState(NodeId id, MaskParams p) : server_id(id), params(p) {}

  std::size_t size() const { return index_replica.size(); }

  // Share at a rank of the local index replica.
  Share share_at(std::size_t rank) const;
};

void handle_store(ServerState& state, RecordId rid, std::string key, Share share);
std::vector<QueryRow> handle_query(const ServerState& state, const RankPredicate& pred);
void handle_delete(ServerState& state, RecordId rid);

// Files written under `directory`: shares.odss, index.odsi, meta.odsm.
void persist(const ServerState& state, const std::filesystem::path& directory);
// An absent or empty directory yields a fresh empty state.
ServerState restore(const std::filesystem::path& directory, NodeId server_id, const MaskParams& params);

std::vector<std::uint8_t> encode_share_table(const ServerState& state);
std::vector<std::uint8_t> encode_meta(const ServerState& state);

// Bytes a server keeps for order queries: share table plus index file.
std::size_t storage_bytes(const ServerState& state);
// SHA-256 over share table, index and metadata files, hex encoded.
std::string state_digest(const ServerState& state);

// Binary search over ranks [lo, hi] (inclusive, hi may be lo - 1).
struct SearchWindow {
  std::int64_t lo = 0;
  std::int64_t hi = -1;

  std::size_t probe() const { return static_cast<std::size_t>(lo + (hi - lo) / 2); }
  friend bool operator==(const SearchWindow&, const SearchWindow&) = default;
};

struct Found {
  std::size_t rank = 0;
  friend bool operator==(const Found&, const Found&) = default;
};

using SearchStep = std::variant<SearchWindow, Found>;

// Empty index: immediate Found(0).
SearchStep start_search(std::size_t n);
// Greater -> right half, Less -> left half, Equal -> Found(probe + 1);
// an emptied window lands on Found(lo).
SearchStep binary_search_step(const SearchWindow& window, Ordering cmp);

struct Outgoing {
  NodeId to = kClientNode;
  ServerMessage msg;
};

// One entry per delta round taken by this replica.
struct SearchTraceEntry {
  std::uint64_t round = 0;
  SearchWindow window;
  std::size_t probe = 0;
  friend bool operator==(const SearchTraceEntry&, const SearchTraceEntry&) = default;
};

// Sequential message-processing loop of one share server. Every input
// yields the messages to send; delivery is the transport's job.
class ServerNode {
 public:
  explicit ServerNode(ServerState state);

  std::vector<Outgoing> handle(NodeId sender, const ServerMessage& msg);

  bool awaiting_round() const { return !std::holds_alternative<std::monostate>(pending_); }
  std::uint64_t current_round() const { return state_.round_counter; }
  // Round deadline expired: drop the pending operation without touching the
  // table or index and report Timeout to the client.
  std::vector<Outgoing> abort_pending();

  const ServerState& state() const { return state_; }
  ServerState release() && { return std::move(state_); }
  // Trace of the most recent search or probe.
  const std::vector<SearchTraceEntry>& last_trace() const { return trace_; }

 private:
  struct PendingInsert {
    RecordId rid;
    std::string key;
    Share share = 0;
    SearchWindow window;
    std::uint32_t rounds = 0;
  };
  struct PendingCompare {
    std::uint64_t probe_id = 0;
  };

  std::vector<Outgoing> on_store(const StoreShare& m);
  std::vector<Outgoing> on_begin_insert(const BeginInsert& m);
  std::vector<Outgoing> on_delta(const DeltaBroadcast& m);
  std::vector<Outgoing> on_query(const QueryRequest& m);
  std::vector<Outgoing> on_delete(const DeleteRecord& m);
  std::vector<Outgoing> on_snapshot(const IndexSnapshot& m);
  std::vector<Outgoing> on_compare(const CompareProbe& m);

  Outgoing open_round(Share in_flight, std::size_t probe_rank, const SearchWindow& window);
  std::vector<Outgoing> advance();
  std::vector<Outgoing> commit_insert(PendingInsert& ins, std::size_t rank);

  ServerState state_;
  RoundBarrier barrier_;
  std::variant<std::monostate, PendingInsert, PendingCompare> pending_;
  std::vector<SearchTraceEntry> trace_;
};

}  // namespace odes
