#include "odes/client.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "odes/error.hpp"

namespace odes {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point since) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count());
}

ErrorCode error_for(AckStatus status) {
  switch (status) {
    case AckStatus::DuplicateRid: return ErrorCode::DuplicateRid;
    case AckStatus::UnknownRid: return ErrorCode::UnknownRid;
    case AckStatus::RankOutOfBounds: return ErrorCode::RankOutOfBounds;
    case AckStatus::MalformedIndex: return ErrorCode::MalformedIndexFile;
    case AckStatus::Timeout: return ErrorCode::ProtocolTimeout;
    default: return ErrorCode::TransportError;
  }
}

}  // namespace

ClientSession::ClientSession(MaskParams params, ClientTransport& transport, RandomSource& rng)
    : params_(params), transport_(transport), rng_(rng) {
  if (transport.server_count() != params.share_count())
    fail(ErrorCode::ConfigError, "transport has " + std::to_string(transport.server_count()) +
                                     " servers but shares are split " + std::to_string(params.share_count()) + " ways");
}

std::vector<Ack> ClientSession::collect_acks(MessageType op, std::uint64_t ref) {
  std::vector<Ack> acks(params_.share_count());
  std::vector<bool> seen(params_.share_count(), false);
  std::size_t have = 0;
  while (have < acks.size()) {
    Received r = transport_.receive();
    const auto* a = std::get_if<Ack>(&r.msg);
    if (a == nullptr || a->op != op || a->ref != ref || r.sender >= acks.size() || seen[r.sender]) continue;
    acks[r.sender] = *a;
    seen[r.sender] = true;
    ++have;
  }
  return acks;
}

void ClientSession::raise_on_error(const std::vector<Ack>& acks, const char* what) {
  for (std::size_t j = 0; j < acks.size(); ++j) {
    if (acks[j].status != AckStatus::Ok)
      fail(error_for(acks[j].status), std::string(what) + " rejected by server " + std::to_string(j));
  }
}

void ClientSession::init_dataset(std::span<const KeyValue> records) {
  for (const KeyValue& kv : records) params_.check_plaintext(kv.value);
  const std::size_t m = params_.share_count();
  ++stats_.requests;

  std::vector<std::pair<std::int64_t, RecordId>> order;
  order.reserve(records.size());
  for (const KeyValue& kv : records) {
    const RecordId rid{next_rid_++};
    const auto started = Clock::now();
    const ShareVector sv = share(kv.value, params_, rng_);
    stats_.compute_ns += elapsed_ns(started);
    for (std::size_t j = 0; j < m; ++j) transport_.send(static_cast<NodeId>(j), StoreShare{rid, kv.key, sv[j]});
    order.emplace_back(kv.value, rid);
  }

  // Insertion order breaks ties, matching the after-equals placement the
  // servers use for later inserts.
  const auto started = Clock::now();
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<RecordId> ranks;
  ranks.reserve(order.size());
  for (const auto& [_, rid] : order) ranks.push_back(rid);
  const OrderIndex index(std::move(ranks));
  stats_.compute_ns += elapsed_ns(started);
  transport_.broadcast(IndexSnapshot{index.serialize()});

  // m acks per record plus m for the snapshot.
  std::size_t expected = m * (records.size() + 1);
  std::optional<Error> failure;
  while (expected > 0) {
    Received r = transport_.receive();
    const auto* a = std::get_if<Ack>(&r.msg);
    if (a == nullptr || (a->op != MessageType::StoreShare && a->op != MessageType::IndexSnapshot)) continue;
    --expected;
    if (a->status != AckStatus::Ok && !failure)
      failure = Error(error_for(a->status), std::string(to_string(a->op)) + " rejected by server " +
                                                std::to_string(r.sender));
  }
  transport_.settle();
  if (failure) throw *failure;
}

InsertReceipt ClientSession::insert_record(std::string_view key, std::int64_t value) {
  params_.check_plaintext(value);
  ++stats_.requests;
  const RecordId rid{next_rid_++};
  const auto started = Clock::now();
  const ShareVector sv = share(value, params_, rng_);
  stats_.compute_ns += elapsed_ns(started);
  for (std::size_t j = 0; j < sv.size(); ++j)
    transport_.send(static_cast<NodeId>(j), BeginInsert{rid, std::string(key), sv[j]});

  const auto acks = collect_acks(MessageType::BeginInsert, rid.value);
  raise_on_error(acks, "insert");
  for (const Ack& a : acks) {
    if (a.result != acks.front().result || a.rounds != acks.front().rounds)
      fail(ErrorCode::ReplicaDivergence, "servers placed rid " + std::to_string(rid.value) + " at different ranks");
  }
  transport_.settle();
  stats_.delta_rounds += acks.front().rounds;
  return InsertReceipt{rid, static_cast<std::uint64_t>(acks.front().result), acks.front().rounds};
}

std::vector<RankedRecord> ClientSession::query_ranks(const RankPredicate& pred) {
  ++stats_.requests;
  const std::uint64_t query_id = next_request_++;
  transport_.broadcast(QueryRequest{query_id, pred});

  const std::size_t m = params_.share_count();
  std::vector<std::optional<QueryResponse>> responses(m);
  std::size_t have = 0;
  while (have < m) {
    Received r = transport_.receive();
    auto* resp = std::get_if<QueryResponse>(&r.msg);
    if (resp == nullptr || resp->query_id != query_id || r.sender >= m || responses[r.sender]) continue;
    responses[r.sender] = std::move(*resp);
    ++have;
  }
  transport_.settle();

  const auto started = Clock::now();
  std::vector<RankedRecord> out;
  const auto& first = responses.front()->rows;
  for (const auto& resp : responses)
    if (resp->rows.size() != first.size())
      fail(ErrorCode::IncompleteResponses, "servers returned different row counts");

  if (alignment_ == Alignment::Positional) {
    out.reserve(first.size());
    for (std::size_t k = 0; k < first.size(); ++k) {
      std::vector<Share> column;
      column.reserve(m);
      for (const auto& resp : responses) {
        const QueryRow& row = resp->rows[k];
        if (row.rid != first[k].rid || row.rank != first[k].rank)
          fail(ErrorCode::IncompleteResponses, "row " + std::to_string(k) + " differs across servers");
        column.push_back(row.share);
      }
      const ShareVector sv{std::move(column)};
      out.push_back(RankedRecord{first[k].rank, first[k].rid, first[k].key, reconstruct(sv, params_)});
    }
  } else {
    struct Partial {
      std::uint64_t rank = 0;
      std::string key;
      std::vector<Share> shares;
    };
    std::map<RecordId, Partial> by_rid;
    for (const QueryRow& row : first) by_rid[row.rid] = Partial{row.rank, row.key, {}};
    if (by_rid.size() != first.size()) fail(ErrorCode::IncompleteResponses, "duplicate rid in a response");
    for (const auto& resp : responses) {
      for (const QueryRow& row : resp->rows) {
        auto it = by_rid.find(row.rid);
        if (it == by_rid.end() || it->second.rank != row.rank)
          fail(ErrorCode::IncompleteResponses, "rid " + std::to_string(row.rid.value) + " not aligned across servers");
        it->second.shares.push_back(row.share);
      }
    }
    out.reserve(by_rid.size());
    for (auto& [rid, partial] : by_rid) {
      if (partial.shares.size() != m)
        fail(ErrorCode::IncompleteResponses, "rid " + std::to_string(rid.value) + " missing shares");
      const ShareVector sv{std::move(partial.shares)};
      out.push_back(RankedRecord{partial.rank, rid, std::move(partial.key), reconstruct(sv, params_)});
    }
    std::sort(out.begin(), out.end(), [](const RankedRecord& a, const RankedRecord& b) { return a.rank < b.rank; });
  }
  stats_.compute_ns += elapsed_ns(started);
  return out;
}

Ordering ClientSession::compare_ephemeral(std::int64_t value, std::uint64_t target_rank) {
  params_.check_plaintext(value);
  ++stats_.requests;
  const std::uint64_t probe_id = next_request_++;
  const auto started = Clock::now();
  const ShareVector sv = share(value, params_, rng_);
  stats_.compute_ns += elapsed_ns(started);
  for (std::size_t j = 0; j < sv.size(); ++j)
    transport_.send(static_cast<NodeId>(j), CompareProbe{probe_id, target_rank, sv[j]});

  const auto acks = collect_acks(MessageType::CompareProbe, probe_id);
  raise_on_error(acks, "compare");
  for (const Ack& a : acks)
    if (a.result != acks.front().result)
      fail(ErrorCode::ReplicaDivergence, "servers disagree on a comparison");
  transport_.settle();
  stats_.delta_rounds += acks.front().rounds;
  const std::int64_t sign = acks.front().result;
  return sign < 0 ? Ordering::Less : sign > 0 ? Ordering::Greater : Ordering::Equal;
}

void ClientSession::delete_record(RecordId rid) {
  ++stats_.requests;
  transport_.broadcast(DeleteRecord{rid});
  const auto acks = collect_acks(MessageType::DeleteRecord, rid.value);
  transport_.settle();
  raise_on_error(acks, "delete");
}

InsertReceipt ClientSession::modify_record(RecordId rid, std::int64_t new_value, std::string_view key) {
  params_.check_plaintext(new_value);
  delete_record(rid);
  return insert_record(key, new_value);
}

std::vector<std::uint8_t> ClientSession::serialize() const {
  ByteWriter w;
  w.raw(kMagic);
  w.u8(0x01);
  w.i64(params_.plaintext_bound());
  w.u8(static_cast<std::uint8_t>(params_.mask_bits()));
  w.u8(static_cast<std::uint8_t>(params_.share_count()));
  w.u64(next_rid_);
  w.u64(next_request_);
  return std::move(w).take();
}

namespace {

struct SessionImage {
  MaskParams params;
  std::uint64_t next_rid;
  std::uint64_t next_request;
};

SessionImage parse_session(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() != ClientSession::kSerializedSize || !r.expect(ClientSession::kMagic) || *r.u8() != 0x01)
    fail(ErrorCode::CorruptStateFile, "bad client session image");
  const auto bound = *r.i64();
  const auto bits = *r.u8();
  const auto m = *r.u8();
  const auto next_rid = *r.u64();
  const auto next_request = *r.u64();
  return SessionImage{MaskParams(bound, bits, m), next_rid, next_request};
}

}  // namespace

MaskParams ClientSession::deserialize_params(std::span<const std::uint8_t> bytes) {
  return parse_session(bytes).params;
}

void ClientSession::restore_counters(std::span<const std::uint8_t> bytes) {
  const SessionImage image = parse_session(bytes);
  if (!(image.params == params_)) fail(ErrorCode::ConfigError, "session image was written with different parameters");
  next_rid_ = image.next_rid;
  next_request_ = image.next_request;
}

}  // namespace odes
