#include "odes/messages.hpp"

#include <algorithm>
#include <string>

#include "odes/error.hpp"
#include "odes/int128.hpp"

namespace odes {

RankPredicate RankPredicate::range(std::uint64_t lo, std::uint64_t hi) {
  if (lo > hi)
    fail(ErrorCode::ConfigError, "rank range " + std::to_string(lo) + ".." + std::to_string(hi) + " is empty");
  return RankPredicate(Kind::RangeByRank, lo, hi);
}

RankPredicate RankPredicate::top_k(std::uint64_t k) {
  if (k < 1) fail(ErrorCode::ConfigError, "top-k needs k >= 1");
  return RankPredicate(Kind::TopK, k, 0);
}

RankPredicate RankPredicate::bottom_k(std::uint64_t k) {
  if (k < 1) fail(ErrorCode::ConfigError, "bottom-k needs k >= 1");
  return RankPredicate(Kind::BottomK, k, 0);
}

RankPredicate RankPredicate::all() { return RankPredicate(Kind::All, 0, 0); }

std::pair<std::size_t, std::size_t> RankPredicate::window(std::size_t n) const {
  const auto clamp = [n](std::uint64_t v) { return static_cast<std::size_t>(std::min<std::uint64_t>(v, n)); };
  switch (kind_) {
    case Kind::RangeByRank:
      return {clamp(a_), b_ == UINT64_MAX ? n : clamp(b_ + 1)};
    case Kind::TopK:
      return {n - clamp(a_), n};
    case Kind::BottomK:
      return {0, clamp(a_)};
    case Kind::All:
      return {0, n};
  }
  return {0, 0};
}

bool RankPredicate::matches(std::size_t rank, std::size_t n) const {
  const auto [begin, end] = window(n);
  return rank >= begin && rank < end;
}

MessageType type_of(const ServerMessage& msg) {
  return std::visit(
      [](const auto& m) -> MessageType {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StoreShare>) return MessageType::StoreShare;
        else if constexpr (std::is_same_v<T, BeginInsert>) return MessageType::BeginInsert;
        else if constexpr (std::is_same_v<T, DeltaBroadcast>) return MessageType::DeltaBroadcast;
        else if constexpr (std::is_same_v<T, QueryRequest>) return MessageType::QueryRequest;
        else if constexpr (std::is_same_v<T, QueryResponse>) return MessageType::QueryResponse;
        else if constexpr (std::is_same_v<T, DeleteRecord>) return MessageType::DeleteRecord;
        else if constexpr (std::is_same_v<T, IndexSnapshot>) return MessageType::IndexSnapshot;
        else if constexpr (std::is_same_v<T, Ack>) return MessageType::Ack;
        else return MessageType::CompareProbe;
      },
      msg);
}

std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::StoreShare: return "StoreShare";
    case MessageType::BeginInsert: return "BeginInsert";
    case MessageType::DeltaBroadcast: return "DeltaBroadcast";
    case MessageType::QueryRequest: return "QueryRequest";
    case MessageType::QueryResponse: return "QueryResponse";
    case MessageType::DeleteRecord: return "DeleteRecord";
    case MessageType::IndexSnapshot: return "IndexSnapshot";
    case MessageType::Ack: return "Ack";
    case MessageType::CompareProbe: return "CompareProbe";
  }
  return "?";
}

namespace {

struct Encoder {
  ByteWriter& w;

  void operator()(const StoreShare& m) {
    w.u64(m.rid.value);
    w.str(m.key);
    w.i128v(m.share);
  }
  void operator()(const BeginInsert& m) {
    w.u64(m.rid.value);
    w.str(m.key);
    w.i128v(m.share);
  }
  void operator()(const DeltaBroadcast& m) {
    w.u16(m.delta.server_id);
    w.u64(m.delta.round);
    w.i128v(m.delta.value);
  }
  void operator()(const QueryRequest& m) {
    w.u64(m.query_id);
    w.u8(static_cast<std::uint8_t>(m.predicate.kind()));
    w.u64(m.predicate.first());
    w.u64(m.predicate.second());
  }
  void operator()(const QueryResponse& m) {
    w.u64(m.query_id);
    w.u64(m.rows.size());
    for (const QueryRow& row : m.rows) {
      w.u64(row.rank);
      w.u64(row.rid.value);
      w.str(row.key);
      w.i128v(row.share);
    }
  }
  void operator()(const DeleteRecord& m) { w.u64(m.rid.value); }
  void operator()(const IndexSnapshot& m) {
    w.u32(static_cast<std::uint32_t>(m.bytes.size()));
    w.bytes(m.bytes);
  }
  void operator()(const Ack& m) {
    w.u8(static_cast<std::uint8_t>(m.op));
    w.u64(m.ref);
    w.u8(static_cast<std::uint8_t>(m.status));
    w.i64(m.result);
    w.u32(m.rounds);
  }
  void operator()(const CompareProbe& m) {
    w.u64(m.probe_id);
    w.u64(m.target_rank);
    w.i128v(m.share);
  }
};

template <typename T>
T need(std::optional<T> v) {
  if (!v) fail(ErrorCode::MalformedMessage, "truncated message");
  return *v;
}

}  // namespace

std::vector<std::uint8_t> encode(const ServerMessage& msg) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(type_of(msg)));
  std::visit(Encoder{w}, msg);
  return std::move(w).take();
}

ServerMessage decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::uint8_t type = need(r.u8());
  ServerMessage out;
  switch (static_cast<MessageType>(type)) {
    case MessageType::StoreShare: {
      StoreShare m;
      m.rid = RecordId{need(r.u64())};
      m.key = need(r.str());
      m.share = need(r.i128v());
      out = std::move(m);
      break;
    }
    case MessageType::BeginInsert: {
      BeginInsert m;
      m.rid = RecordId{need(r.u64())};
      m.key = need(r.str());
      m.share = need(r.i128v());
      out = std::move(m);
      break;
    }
    case MessageType::DeltaBroadcast: {
      DeltaBroadcast m;
      m.delta.server_id = need(r.u16());
      m.delta.round = need(r.u64());
      m.delta.value = need(r.i128v());
      out = m;
      break;
    }
    case MessageType::QueryRequest: {
      QueryRequest m;
      m.query_id = need(r.u64());
      const auto kind = need(r.u8());
      const auto a = need(r.u64());
      const auto b = need(r.u64());
      try {
        switch (static_cast<RankPredicate::Kind>(kind)) {
          case RankPredicate::Kind::RangeByRank: m.predicate = RankPredicate::range(a, b); break;
          case RankPredicate::Kind::TopK: m.predicate = RankPredicate::top_k(a); break;
          case RankPredicate::Kind::BottomK: m.predicate = RankPredicate::bottom_k(a); break;
          case RankPredicate::Kind::All: m.predicate = RankPredicate::all(); break;
          default: fail(ErrorCode::MalformedMessage, "unknown predicate kind " + std::to_string(kind));
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedMessage) throw;
        fail(ErrorCode::MalformedMessage, e.what());
      }
      out = m;
      break;
    }
    case MessageType::QueryResponse: {
      QueryResponse m;
      m.query_id = need(r.u64());
      const auto count = need(r.u64());
      // Each row is at least 36 bytes; reject counts the payload cannot hold.
      if (count > r.remaining() / 36) fail(ErrorCode::MalformedMessage, "row count exceeds payload");
      m.rows.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        QueryRow row;
        row.rank = need(r.u64());
        row.rid = RecordId{need(r.u64())};
        row.key = need(r.str());
        row.share = need(r.i128v());
        m.rows.push_back(std::move(row));
      }
      out = std::move(m);
      break;
    }
    case MessageType::DeleteRecord:
      out = DeleteRecord{RecordId{need(r.u64())}};
      break;
    case MessageType::IndexSnapshot: {
      const auto len = need(r.u32());
      if (len != r.remaining()) fail(ErrorCode::MalformedMessage, "snapshot length mismatch");
      IndexSnapshot m;
      m.bytes.assign(bytes.end() - static_cast<std::ptrdiff_t>(len), bytes.end());
      for (std::uint32_t i = 0; i < len; ++i) need(r.u8());
      out = std::move(m);
      break;
    }
    case MessageType::Ack: {
      Ack m;
      const auto op = need(r.u8());
      if (op < 0x01 || op > 0x09) fail(ErrorCode::MalformedMessage, "unknown ack op " + std::to_string(op));
      m.op = static_cast<MessageType>(op);
      m.ref = need(r.u64());
      const auto status = need(r.u8());
      if (status > 6) fail(ErrorCode::MalformedMessage, "unknown ack status " + std::to_string(status));
      m.status = static_cast<AckStatus>(status);
      m.result = need(r.i64());
      m.rounds = need(r.u32());
      out = m;
      break;
    }
    case MessageType::CompareProbe: {
      CompareProbe m;
      m.probe_id = need(r.u64());
      m.target_rank = need(r.u64());
      m.share = need(r.i128v());
      out = m;
      break;
    }
    default:
      fail(ErrorCode::MalformedMessage, "unknown message type " + std::to_string(type));
  }
  if (!r.done()) fail(ErrorCode::MalformedMessage, "trailing bytes after message");
  return out;
}

}  // namespace odes
