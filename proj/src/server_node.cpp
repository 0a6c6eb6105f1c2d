#include "odes/server_node.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <string>

#include "odes/error.hpp"

namespace odes {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kShareMagic = "ODSS";
constexpr std::string_view kMetaMagic = "ODSM";
constexpr std::uint8_t kFileVersion = 0x01;

constexpr const char* kShareFile = "shares.odss";
constexpr const char* kIndexFile = "index.odsi";
constexpr const char* kMetaFile = "meta.odsm";

std::string rid_str(RecordId rid) { return std::to_string(rid.value); }

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <typename T>
T need(std::optional<T> v, const char* what) {
  if (!v) fail(ErrorCode::CorruptStateFile, std::string("truncated ") + what);
  return *v;
}

Ack ack(MessageType op, std::uint64_t ref, AckStatus status, std::int64_t result = 0, std::uint32_t rounds = 0) {
  return Ack{op, ref, status, result, rounds};
}

AckStatus status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateRid: return AckStatus::DuplicateRid;
    case ErrorCode::UnknownRid: return AckStatus::UnknownRid;
    case ErrorCode::RankOutOfBounds: return AckStatus::RankOutOfBounds;
    case ErrorCode::MalformedIndexFile: return AckStatus::MalformedIndex;
    default: return AckStatus::MalformedMessage;
  }
}

}  // namespace

Share ServerState::share_at(std::size_t rank) const {
  const RecordId rid = index_replica.lookup(rank);
  auto it = share_table.find(rid);
  if (it == share_table.end()) fail(ErrorCode::UnknownRid, "index refers to missing rid " + rid_str(rid));
  return it->second.share;
}

void handle_store(ServerState& state, RecordId rid, std::string key, Share share) {
  if (state.share_table.contains(rid) || state.retired.contains(rid))
    fail(ErrorCode::DuplicateRid, "rid " + rid_str(rid) + " already used on server " +
                                      std::to_string(state.server_id));
  state.share_table.emplace(rid, StoredShare{std::move(key), share});
}

std::vector<QueryRow> handle_query(const ServerState& state, const RankPredicate& pred) {
  const std::size_t n = state.size();
  const auto [begin, end] = pred.window(n);
  std::vector<QueryRow> rows;
  rows.reserve(end - begin);
  for (std::size_t rank = begin; rank < end; ++rank) {
    const RecordId rid = state.index_replica.lookup(rank);
    const StoredShare& stored = state.share_table.at(rid);
    rows.push_back(QueryRow{rank, rid, stored.key, stored.share});
  }
  return rows;
}

void handle_delete(ServerState& state, RecordId rid) {
  auto it = state.share_table.find(rid);
  if (it == state.share_table.end()) fail(ErrorCode::UnknownRid, "rid " + rid_str(rid));
  if (state.index_replica.contains(rid)) state.index_replica.remove(rid);
  state.share_table.erase(it);
  state.retired.insert(rid);
}

std::vector<std::uint8_t> encode_share_table(const ServerState& state) {
  ByteWriter w;
  w.raw(kShareMagic);
  w.u8(kFileVersion);
  w.u64(state.share_table.size());
  for (const auto& [rid, stored] : state.share_table) {
    w.u64(rid.value);
    w.i128v(stored.share);
  }
  return std::move(w).take();
}

std::vector<std::uint8_t> encode_meta(const ServerState& state) {
  ByteWriter w;
  w.raw(kMetaMagic);
  w.u8(kFileVersion);
  w.u64(state.share_table.size());
  for (const auto& [rid, stored] : state.share_table) {
    w.u64(rid.value);
    w.str(stored.key);
  }
  w.u64(state.retired.size());
  for (RecordId rid : state.retired) w.u64(rid.value);
  return std::move(w).take();
}

void persist(const ServerState& state, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + directory.string() + ": " + ec.message());
  write_file(directory / kShareFile, encode_share_table(state));
  write_file(directory / kIndexFile, state.index_replica.serialize());
  write_file(directory / kMetaFile, encode_meta(state));
}

ServerState restore(const fs::path& directory, NodeId server_id, const MaskParams& params) {
  ServerState state(server_id, params);
  const bool has_shares = fs::exists(directory / kShareFile);
  const bool has_index = fs::exists(directory / kIndexFile);
  const bool has_meta = fs::exists(directory / kMetaFile);
  if (!has_shares && !has_index && !has_meta) return state;
  if (!has_shares || !has_index || !has_meta)
    fail(ErrorCode::CorruptStateFile, "incomplete server state in " + directory.string());

  {
    const auto bytes = read_file(directory / kShareFile);
    ByteReader r(bytes);
    if (!r.expect(kShareMagic)) fail(ErrorCode::CorruptStateFile, "share file: bad magic");
    if (need(r.u8(), "share header") != kFileVersion)
      fail(ErrorCode::CorruptStateFile, "share file: unsupported version");
    const std::uint64_t count = need(r.u64(), "share header");
    if (r.remaining() != count * 24)
      fail(ErrorCode::CorruptStateFile, "share file: " + std::to_string(count) + " rows declared, " +
                                            std::to_string(r.remaining()) + " payload bytes");
    for (std::uint64_t i = 0; i < count; ++i) {
      const RecordId rid{need(r.u64(), "share row")};
      const Share share = need(r.i128v(), "share row");
      if (!state.share_table.emplace(rid, StoredShare{{}, share}).second)
        fail(ErrorCode::CorruptStateFile, "share file: duplicate rid " + rid_str(rid));
    }
  }
  try {
    state.index_replica = OrderIndex::deserialize(read_file(directory / kIndexFile));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    fail(ErrorCode::CorruptStateFile, std::string("index file: ") + e.what());
  }
  {
    const auto bytes = read_file(directory / kMetaFile);
    ByteReader r(bytes);
    if (!r.expect(kMetaMagic)) fail(ErrorCode::CorruptStateFile, "meta file: bad magic");
    if (need(r.u8(), "meta header") != kFileVersion)
      fail(ErrorCode::CorruptStateFile, "meta file: unsupported version");
    const std::uint64_t count = need(r.u64(), "meta header");
    if (count != state.share_table.size()) fail(ErrorCode::CorruptStateFile, "meta/share row count mismatch");
    for (std::uint64_t i = 0; i < count; ++i) {
      const RecordId rid{need(r.u64(), "meta row")};
      auto it = state.share_table.find(rid);
      if (it == state.share_table.end()) fail(ErrorCode::CorruptStateFile, "meta file: unknown rid " + rid_str(rid));
      it->second.key = need(r.str(), "meta key");
    }
    const std::uint64_t retired = need(r.u64(), "meta retired count");
    for (std::uint64_t i = 0; i < retired; ++i) state.retired.insert(RecordId{need(r.u64(), "retired rid")});
    if (!r.done()) fail(ErrorCode::CorruptStateFile, "meta file: trailing bytes");
  }
  if (state.index_replica.size() != state.share_table.size())
    fail(ErrorCode::CorruptStateFile, "index and share table sizes differ");
  for (RecordId rid : state.index_replica.ranks())
    if (!state.share_table.contains(rid)) fail(ErrorCode::CorruptStateFile, "index rid " + rid_str(rid) + " has no share");
  return state;
}

std::size_t storage_bytes(const ServerState& state) {
  // Header (magic + version + count) plus fixed-width rows.
  return (4 + 1 + 8 + 24 * state.share_table.size()) + (4 + 1 + 8 + 8 * state.index_replica.size());
}

std::string state_digest(const ServerState& state) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) fail(ErrorCode::IoError, "EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& part : {encode_share_table(state), state.index_replica.serialize(), encode_meta(state)})
    EVP_DigestUpdate(ctx, part.data(), part.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

SearchStep start_search(std::size_t n) {
  if (n == 0) return Found{0};
  return SearchWindow{0, static_cast<std::int64_t>(n) - 1};
}

SearchStep binary_search_step(const SearchWindow& window, Ordering cmp) {
  const auto mid = static_cast<std::int64_t>(window.probe());
  SearchWindow next = window;
  switch (cmp) {
    case Ordering::Equal:
      return Found{static_cast<std::size_t>(mid + 1)};
    case Ordering::Greater:
      next.lo = mid + 1;
      break;
    case Ordering::Less:
      next.hi = mid - 1;
      break;
  }
  if (next.lo > next.hi) return Found{static_cast<std::size_t>(next.lo)};
  return next;
}

ServerNode::ServerNode(ServerState state)
    : state_(std::move(state)), barrier_(state_.params.share_count()) {}

std::vector<Outgoing> ServerNode::handle(NodeId sender, const ServerMessage& msg) {
  (void)sender;
  return std::visit(
      [&](const auto& m) -> std::vector<Outgoing> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StoreShare>) return on_store(m);
        else if constexpr (std::is_same_v<T, BeginInsert>) return on_begin_insert(m);
        else if constexpr (std::is_same_v<T, DeltaBroadcast>) return on_delta(m);
        else if constexpr (std::is_same_v<T, QueryRequest>) return on_query(m);
        else if constexpr (std::is_same_v<T, DeleteRecord>) return on_delete(m);
        else if constexpr (std::is_same_v<T, IndexSnapshot>) return on_snapshot(m);
        else if constexpr (std::is_same_v<T, CompareProbe>) return on_compare(m);
        else return {Outgoing{kClientNode, ack(type_of(msg), 0, AckStatus::MalformedMessage)}};
      },
      msg);
}

std::vector<Outgoing> ServerNode::on_store(const StoreShare& m) {
  try {
    handle_store(state_, m.rid, m.key, m.share);
  } catch (const Error& e) {
    return {Outgoing{kClientNode, ack(MessageType::StoreShare, m.rid.value, status_of(e.code()))}};
  }
  return {Outgoing{kClientNode, ack(MessageType::StoreShare, m.rid.value, AckStatus::Ok)}};
}

Outgoing ServerNode::open_round(Share in_flight, std::size_t probe_rank, const SearchWindow& window) {
  const std::uint64_t round = ++state_.round_counter;
  trace_.push_back(SearchTraceEntry{round, window, probe_rank});
  const Delta delta = local_delta(in_flight, state_.share_at(probe_rank), state_.server_id, round);
  return Outgoing{kBroadcast, DeltaBroadcast{delta}};
}

std::vector<Outgoing> ServerNode::on_begin_insert(const BeginInsert& m) {
  if (awaiting_round())
    return {Outgoing{kClientNode, ack(MessageType::BeginInsert, m.rid.value, AckStatus::MalformedMessage)}};
  if (state_.share_table.contains(m.rid) || state_.retired.contains(m.rid))
    return {Outgoing{kClientNode, ack(MessageType::BeginInsert, m.rid.value, AckStatus::DuplicateRid)}};

  trace_.clear();
  PendingInsert ins{m.rid, m.key, m.share, {}, 0};
  const SearchStep step = start_search(state_.size());
  if (const auto* found = std::get_if<Found>(&step)) return commit_insert(ins, found->rank);
  ins.window = std::get<SearchWindow>(step);
  ins.rounds = 1;
  std::vector<Outgoing> out{open_round(ins.share, ins.window.probe(), ins.window)};
  pending_ = std::move(ins);
  auto more = advance();
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  return out;
}

std::vector<Outgoing> ServerNode::commit_insert(PendingInsert& ins, std::size_t rank) {
  handle_store(state_, ins.rid, std::move(ins.key), ins.share);
  state_.index_replica.insert_at(rank, ins.rid);
  return {Outgoing{kClientNode, ack(MessageType::BeginInsert, ins.rid.value, AckStatus::Ok,
                                    static_cast<std::int64_t>(rank), ins.rounds)}};
}

std::vector<Outgoing> ServerNode::on_delta(const DeltaBroadcast& m) {
  if (m.delta.server_id >= state_.params.share_count()) return {};
  barrier_.offer(m.delta);
  return advance();
}

std::vector<Outgoing> ServerNode::advance() {
  std::vector<Outgoing> out;
  while (awaiting_round()) {
    auto deltas = barrier_.try_take(state_.round_counter);
    if (!deltas) break;
    const Ordering cmp = aggregate_sign(*deltas, state_.params.share_count());

    if (auto* cmp_probe = std::get_if<PendingCompare>(&pending_)) {
      const std::int64_t sign = cmp == Ordering::Less ? -1 : cmp == Ordering::Greater ? 1 : 0;
      out.push_back(Outgoing{kClientNode, ack(MessageType::CompareProbe, cmp_probe->probe_id, AckStatus::Ok, sign, 1)});
      pending_ = std::monostate{};
      break;
    }

    auto& ins = std::get<PendingInsert>(pending_);
    const SearchStep step = binary_search_step(ins.window, cmp);
    if (const auto* found = std::get_if<Found>(&step)) {
      auto done = commit_insert(ins, found->rank);
      pending_ = std::monostate{};
      out.insert(out.end(), std::make_move_iterator(done.begin()), std::make_move_iterator(done.end()));
      break;
    }
    ins.window = std::get<SearchWindow>(step);
    ++ins.rounds;
    out.push_back(open_round(ins.share, ins.window.probe(), ins.window));
  }
  return out;
}

std::vector<Outgoing> ServerNode::on_query(const QueryRequest& m) {
  return {Outgoing{kClientNode, QueryResponse{m.query_id, handle_query(state_, m.predicate)}}};
}

std::vector<Outgoing> ServerNode::on_delete(const DeleteRecord& m) {
  if (awaiting_round())
    return {Outgoing{kClientNode, ack(MessageType::DeleteRecord, m.rid.value, AckStatus::MalformedMessage)}};
  try {
    handle_delete(state_, m.rid);
  } catch (const Error& e) {
    return {Outgoing{kClientNode, ack(MessageType::DeleteRecord, m.rid.value, status_of(e.code()))}};
  }
  return {Outgoing{kClientNode, ack(MessageType::DeleteRecord, m.rid.value, AckStatus::Ok)}};
}

std::vector<Outgoing> ServerNode::on_snapshot(const IndexSnapshot& m) {
  const auto reject = [&] {
    return std::vector<Outgoing>{Outgoing{kClientNode, ack(MessageType::IndexSnapshot, 0, AckStatus::MalformedIndex)}};
  };
  OrderIndex index;
  try {
    index = OrderIndex::deserialize(m.bytes);
  } catch (const Error&) {
    return reject();
  }
  if (index.size() != state_.share_table.size()) return reject();
  for (RecordId rid : index.ranks())
    if (!state_.share_table.contains(rid)) return reject();
  state_.index_replica = std::move(index);
  return {Outgoing{kClientNode, ack(MessageType::IndexSnapshot, state_.index_replica.size(), AckStatus::Ok)}};
}

std::vector<Outgoing> ServerNode::on_compare(const CompareProbe& m) {
  if (awaiting_round())
    return {Outgoing{kClientNode, ack(MessageType::CompareProbe, m.probe_id, AckStatus::MalformedMessage)}};
  if (m.target_rank >= state_.size())
    return {Outgoing{kClientNode, ack(MessageType::CompareProbe, m.probe_id, AckStatus::RankOutOfBounds)}};
  trace_.clear();
  const auto rank = static_cast<std::size_t>(m.target_rank);
  const auto at = static_cast<std::int64_t>(rank);
  std::vector<Outgoing> out{open_round(m.share, rank, SearchWindow{at, at})};
  pending_ = PendingCompare{m.probe_id};
  auto more = advance();
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  return out;
}

std::vector<Outgoing> ServerNode::abort_pending() {
  std::vector<Outgoing> out;
  if (const auto* ins = std::get_if<PendingInsert>(&pending_)) {
    out.push_back(Outgoing{kClientNode, ack(MessageType::BeginInsert, ins->rid.value, AckStatus::Timeout, 0, ins->rounds)});
  } else if (const auto* cmp = std::get_if<PendingCompare>(&pending_)) {
    out.push_back(Outgoing{kClientNode, ack(MessageType::CompareProbe, cmp->probe_id, AckStatus::Timeout)});
  }
  pending_ = std::monostate{};
  barrier_.discard_through(state_.round_counter);
  return out;
}

}  // namespace odes
