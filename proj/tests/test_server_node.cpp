#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <filesystem>
#include <fstream>
#include <random>

#include "odes/error.hpp"
#include "odes/server_node.hpp"
#include "test_support.hpp"

using namespace odes;
using namespace odes::testing;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

// Minimal hand-rolled router: FIFO over (from, to, msg), broadcast fanned
// out to every node including the sender.
struct Bench {
  std::vector<ServerNode> nodes;
  std::vector<Ack> acks;
  std::vector<QueryResponse> responses;
  std::vector<DeltaBroadcast> deltas_seen;
  std::deque<std::pair<NodeId, Outgoing>> queue;

  explicit Bench(std::vector<ServerState> states) {
    for (auto& s : states) nodes.emplace_back(std::move(s));
  }

  void route(NodeId from, std::vector<Outgoing> out) {
    for (auto& o : out) queue.emplace_back(from, std::move(o));
  }

  void send_to(NodeId j, const ServerMessage& msg) { route(kClientNode, {Outgoing{j, msg}}), run(); }

  void send_all(const std::vector<ServerMessage>& per_server) {
    for (std::size_t j = 0; j < nodes.size(); ++j) route(kClientNode, {Outgoing{static_cast<NodeId>(j), per_server[j]}});
    run();
  }

  void run() {
    while (!queue.empty()) {
      auto [from, o] = std::move(queue.front());
      queue.pop_front();
      if (o.to == kClientNode) {
        if (auto* a = std::get_if<Ack>(&o.msg)) acks.push_back(*a);
        if (auto* r = std::get_if<QueryResponse>(&o.msg)) responses.push_back(*r);
      } else if (o.to == kBroadcast) {
        deltas_seen.push_back(std::get<DeltaBroadcast>(o.msg));
        for (std::size_t j = 0; j < nodes.size(); ++j) route(static_cast<NodeId>(j), nodes[j].handle(from, o.msg));
      } else {
        route(o.to, nodes[o.to].handle(from, o.msg));
      }
    }
  }
};

std::vector<ServerState> example_states(const MaskParams& params) {
  std::vector<ServerState> states{ServerState(0, params), ServerState(1, params)};
  std::vector<std::int64_t> values;
  std::uint64_t rid = 1;
  for (const auto& row : example_months()) {
    handle_store(states[0], RecordId{rid}, row.key, row.plus_share);
    handle_store(states[1], RecordId{rid}, row.key, row.minus_share);
    values.push_back(row.value);
    ++rid;
  }
  std::vector<RecordId> ranks;
  for (std::size_t i : stable_argsort(values)) ranks.push_back(RecordId{i + 1});
  for (auto& s : states) s.index_replica = OrderIndex(ranks);
  return states;
}

std::vector<ServerState> random_states(const MaskParams& params, const std::vector<std::int64_t>& values,
                                       SeededRandom& rng) {
  std::vector<ServerState> states;
  for (unsigned j = 0; j < params.share_count(); ++j) states.emplace_back(static_cast<NodeId>(j), params);
  std::vector<RecordId> ranks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ShareVector sv = share(values[i], params, rng);
    for (unsigned j = 0; j < params.share_count(); ++j)
      handle_store(states[j], RecordId{i + 1}, "k" + std::to_string(i), sv[j]);
  }
  for (std::size_t i : stable_argsort(values)) ranks.push_back(RecordId{i + 1});
  for (auto& s : states) s.index_replica = OrderIndex(ranks);
  return states;
}

std::vector<std::int64_t> reconstruct_rows(const std::vector<QueryResponse>& per_server) {
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < per_server[0].rows.size(); ++k) {
    i128 sum = 0;
    for (const auto& r : per_server) sum += r.rows[k].share;
    out.push_back(static_cast<std::int64_t>(sum));
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("odes_server_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("binary search steps") {
  CHECK(std::get<Found>(start_search(0)) == Found{0});
  const auto w = std::get<SearchWindow>(start_search(4));
  CHECK(w == SearchWindow{0, 3});
  CHECK(w.probe() == 1);
  CHECK(std::get<SearchWindow>(binary_search_step(w, Ordering::Greater)) == SearchWindow{2, 3});
  CHECK(std::get<SearchWindow>(binary_search_step(w, Ordering::Less)) == SearchWindow{0, 0});
  CHECK(std::get<Found>(binary_search_step(SearchWindow{0, 0}, Ordering::Less)) == Found{0});
  CHECK(std::get<Found>(binary_search_step(w, Ordering::Equal)) == Found{2});
  CHECK(std::get<Found>(binary_search_step(SearchWindow{3, 3}, Ordering::Greater)) == Found{4});
}

TEST_CASE("handle_store stores and refuses reuse") {
  ServerState s(0, MaskParams());
  handle_store(s, RecordId{7}, "22-APR", -6000);
  CHECK(s.share_table.at(RecordId{7}).share == -6000);
  CHECK(s.index_replica.empty());
  CHECK(code_of([&] { handle_store(s, RecordId{7}, "x", 1); }) == ErrorCode::DuplicateRid);
  s.index_replica.insert_at(0, RecordId{7});
  handle_delete(s, RecordId{7});
  CHECK(s.share_table.empty());
  CHECK(s.index_replica.empty());
  CHECK(code_of([&] { handle_store(s, RecordId{7}, "x", 1); }) == ErrorCode::DuplicateRid);
  CHECK(code_of([&] { handle_delete(s, RecordId{8}); }) == ErrorCode::UnknownRid);
}

TEST_CASE("single-record table: 22-MAY lands before 22-APR") {
  const MaskParams params(1'000'000, 40, 2);
  std::vector<ServerState> states{ServerState(0, params), ServerState(1, params)};
  handle_store(states[0], RecordId{4}, "22-APR", -6000);
  handle_store(states[1], RecordId{4}, "22-APR", 20000);
  for (auto& s : states) s.index_replica.insert_at(0, RecordId{4});
  Bench bench(std::move(states));
  bench.send_all({BeginInsert{RecordId{5}, "22-MAY", 3000}, BeginInsert{RecordId{5}, "22-MAY", 8000}});
  REQUIRE(bench.deltas_seen.size() == 2);
  CHECK(bench.deltas_seen[0].delta.value == 9000);
  CHECK(bench.deltas_seen[1].delta.value == -12000);
  REQUIRE(bench.acks.size() == 2);
  for (const Ack& a : bench.acks) {
    CHECK(a.status == AckStatus::Ok);
    CHECK(a.result == 0);
    CHECK(a.rounds == 1);
  }
  for (const auto& n : bench.nodes) CHECK(n.state().index_replica.lookup(0) == RecordId{5});
}

TEST_CASE("four-month table: 11000 is ranked after JAN") {
  const MaskParams params(1'000'000, 40, 2);
  Bench bench(example_states(params));
  bench.send_all({BeginInsert{RecordId{5}, "22-MAY", 3000}, BeginInsert{RecordId{5}, "22-MAY", 8000}});
  REQUIRE(bench.acks.size() == 2);
  CHECK(bench.acks[0].result == 1);
  CHECK(bench.acks[0].rounds <= ceil_log2(4) + 1);
  CHECK(bench.nodes[0].state().index_replica == bench.nodes[1].state().index_replica);
  CHECK(bench.nodes[0].last_trace() == bench.nodes[1].last_trace());
}

TEST_CASE("empty table insert needs no rounds") {
  const MaskParams params(1000, 8, 3);
  Bench bench({ServerState(0, params), ServerState(1, params), ServerState(2, params)});
  bench.send_all({BeginInsert{RecordId{1}, "a", 3}, BeginInsert{RecordId{1}, "a", -1}, BeginInsert{RecordId{1}, "a", 0}});
  CHECK(bench.deltas_seen.empty());
  REQUIRE(bench.acks.size() == 3);
  for (const Ack& a : bench.acks) CHECK((a.status == AckStatus::Ok && a.result == 0 && a.rounds == 0));
}

TEST_CASE("property: 500 shuffled inserts hit the oracle rank within the round bound") {
  for (unsigned m : {2u, 3u}) {
    const MaskParams params(1'000'000, 40, m);
    SeededRandom rng(400 + m);
    std::mt19937_64 pick(m);
    std::vector<ServerState> states;
    for (unsigned j = 0; j < m; ++j) states.emplace_back(static_cast<NodeId>(j), params);
    Bench bench(std::move(states));
    std::vector<std::int64_t> present;
    std::vector<std::int64_t> pool;
    for (int i = 0; i < 500; ++i) pool.push_back(static_cast<std::int64_t>(pick() % 2001) - 1000);
    std::shuffle(pool.begin(), pool.end(), pick);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const ShareVector sv = share(pool[i], params, rng);
      std::vector<ServerMessage> msgs;
      for (unsigned j = 0; j < m; ++j) msgs.push_back(BeginInsert{RecordId{i + 1}, "", sv[j]});
      bench.acks.clear();
      bench.send_all(msgs);
      REQUIRE(bench.acks.size() == m);
      const auto rank = static_cast<std::size_t>(bench.acks[0].result);
      std::size_t strictly_less = 0;
      for (std::int64_t v : present) strictly_less += v < pool[i] ? 1 : 0;
      REQUIRE(rank >= strictly_less);
      REQUIRE(rank <= oracle_rank(present, pool[i]));
      REQUIRE(bench.acks[0].rounds <= ceil_log2(present.size()) + 1);
      for (const Ack& a : bench.acks) REQUIRE(a == bench.acks[0]);
      present.push_back(pool[i]);
      for (const auto& n : bench.nodes) REQUIRE(n.state().index_replica == bench.nodes[0].state().index_replica);
    }
    bench.responses.clear();
    std::vector<ServerMessage> q(m, ServerMessage{QueryRequest{1, RankPredicate::all()}});
    bench.send_all(q);
    CHECK(reconstruct_rows(bench.responses) == sorted_multiset(present));
  }
}

TEST_CASE("non-disclosure: inter-server traffic carries no stored share") {
  const MaskParams params(1'000'000, 40, 2);
  SeededRandom rng(8);
  std::vector<std::int64_t> values;
  for (int i = 0; i < 64; ++i) values.push_back(i * 1000 - 30000);
  Bench bench(random_states(params, values, rng));
  std::set<i128> stored;
  for (const auto& n : bench.nodes)
    for (const auto& [rid, s] : n.state().share_table) stored.insert(s.share);
  for (int i = 0; i < 20; ++i) {
    const ShareVector sv = share(i * 777, params, rng);
    stored.insert(sv[0]);
    stored.insert(sv[1]);
    bench.send_all({BeginInsert{RecordId{1000u + i}, "", sv[0]}, BeginInsert{RecordId{1000u + i}, "", sv[1]}});
  }
  REQUIRE_FALSE(bench.deltas_seen.empty());
  for (const auto& d : bench.deltas_seen) CHECK_FALSE(stored.contains(d.delta.value));
}

TEST_CASE("handle_query windows reconstruct the sorted slice") {
  const MaskParams params(1'000'000, 40, 2);
  SeededRandom rng(9);
  std::mt19937_64 pick(10);
  std::vector<std::int64_t> values;
  for (int i = 0; i < 10; ++i) values.push_back(static_cast<std::int64_t>(pick() % 100000));
  const auto states = random_states(params, values, rng);
  const auto sorted = sorted_multiset(values);

  std::vector<QueryResponse> slices;
  for (const auto& s : states) slices.push_back(QueryResponse{0, handle_query(s, RankPredicate::range(2, 5))});
  CHECK(reconstruct_rows(slices) == std::vector<std::int64_t>(sorted.begin() + 2, sorted.begin() + 6));
  CHECK(slices[0].rows.front().rank == 2);

  slices.clear();
  for (const auto& s : states) slices.push_back(QueryResponse{0, handle_query(s, RankPredicate::range(0, 0))});
  CHECK(reconstruct_rows(slices) == std::vector<std::int64_t>{sorted[0]});
  CHECK(handle_query(states[0], RankPredicate::all()).size() == 10);
  CHECK(handle_query(ServerState(0, params), RankPredicate::all()).empty());
}

TEST_CASE("delete the middle of 100 values") {
  const MaskParams params(1'000'000, 40, 3);
  SeededRandom rng(12);
  std::vector<std::int64_t> values;
  std::mt19937_64 pick(13);
  for (int i = 0; i < 100; ++i) values.push_back(static_cast<std::int64_t>(pick() % 50000));
  auto states = random_states(params, values, rng);
  const RecordId middle = states[0].index_replica.lookup(50);
  for (auto& s : states) handle_delete(s, middle);
  std::vector<std::int64_t> remaining = values;
  remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(middle.value - 1));
  std::vector<QueryResponse> rows;
  for (const auto& s : states) {
    CHECK(s.size() == 99);
    rows.push_back(QueryResponse{0, handle_query(s, RankPredicate::all())});
  }
  CHECK(reconstruct_rows(rows) == sorted_multiset(remaining));
}

TEST_CASE("compare probe reports the sign without touching the index") {
  const MaskParams params(1'000'000, 40, 2);
  Bench bench(example_states(params));
  const auto before = bench.nodes[0].state().index_replica;
  // 11000 against rank 3 (22-APR, 14000).
  bench.send_all({CompareProbe{1, 3, 3000}, CompareProbe{1, 3, 8000}});
  REQUIRE(bench.acks.size() == 2);
  CHECK(bench.acks[0].result == -1);
  CHECK(bench.acks[0].rounds == 1);
  bench.acks.clear();
  bench.send_all({CompareProbe{2, 0, 4000}, CompareProbe{2, 0, 4000}});  // 8000 vs JAN
  CHECK(bench.acks[0].result == 0);
  bench.acks.clear();
  bench.send_all({CompareProbe{3, 9, 0}, CompareProbe{3, 9, 0}});
  CHECK(bench.acks[0].status == AckStatus::RankOutOfBounds);
  CHECK(bench.nodes[0].state().index_replica == before);
}

TEST_CASE("missing delta: abort leaves state untouched") {
  const MaskParams params(1'000'000, 40, 2);
  auto states = example_states(params);
  ServerNode node(std::move(states[0]));
  const std::string digest = state_digest(node.state());
  auto out = node.handle(kClientNode, BeginInsert{RecordId{9}, "x", 1});
  REQUIRE(out.size() == 1);
  CHECK(out[0].to == kBroadcast);
  // Only our own delta arrives; the round cannot complete.
  CHECK(node.handle(0, out[0].msg).empty());
  CHECK(node.awaiting_round());
  const auto aborted = node.abort_pending();
  REQUIRE(aborted.size() == 1);
  CHECK(std::get<Ack>(aborted[0].msg).status == AckStatus::Timeout);
  CHECK_FALSE(node.awaiting_round());
  CHECK(state_digest(node.state()) == digest);
  // A late delta for the aborted round is dropped.
  CHECK(node.handle(1, DeltaBroadcast{Delta{1, 1, 5}}).empty());
  CHECK_FALSE(node.awaiting_round());
}

TEST_CASE("index snapshot must match the share table") {
  const MaskParams params(1000, 8, 2);
  ServerState s(0, params);
  handle_store(s, RecordId{1}, "a", 1);
  handle_store(s, RecordId{2}, "b", 2);
  ServerNode node(std::move(s));
  auto reply = [&](std::vector<std::uint8_t> bytes) {
    return std::get<Ack>(node.handle(kClientNode, IndexSnapshot{std::move(bytes)})[0].msg);
  };
  CHECK(reply(OrderIndex(std::vector<RecordId>{{1}}).serialize()).status == AckStatus::MalformedIndex);
  CHECK(reply(OrderIndex(std::vector<RecordId>{{1}, {3}}).serialize()).status == AckStatus::MalformedIndex);
  CHECK(reply({'j', 'u', 'n', 'k'}).status == AckStatus::MalformedIndex);
  const Ack ok = reply(OrderIndex(std::vector<RecordId>{{2}, {1}}).serialize());
  CHECK(ok.status == AckStatus::Ok);
  CHECK(ok.ref == 2);
  CHECK(node.state().index_replica.lookup(0) == RecordId{2});
}

TEST_CASE("share table file is bit exact") {
  ServerState s(0, MaskParams());
  handle_store(s, RecordId{2}, "k", -1);
  s.index_replica.insert_at(0, RecordId{2});
  std::vector<std::uint8_t> expected = {'O', 'D', 'S', 'S', 0x01, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2};
  for (int i = 0; i < 16; ++i) expected.push_back(0xFF);
  CHECK(encode_share_table(s) == expected);
  CHECK(storage_bytes(s) == expected.size() + s.index_replica.serialize().size());
}

TEST_CASE("persist and restore round trip 10^4 records") {
  const MaskParams params(1'000'000'000, 40, 2);
  SeededRandom rng(14);
  std::vector<std::int64_t> values;
  std::mt19937_64 pick(15);
  for (int i = 0; i < 10000; ++i) values.push_back(static_cast<std::int64_t>(pick() % 1'000'000'000));
  auto states = random_states(params, values, rng);
  handle_delete(states[1], RecordId{17});
  const fs::path dir = scratch("roundtrip");
  persist(states[1], dir);
  const ServerState back = restore(dir, 1, params);
  CHECK(back.share_table == states[1].share_table);
  CHECK(back.index_replica == states[1].index_replica);
  CHECK(back.retired == states[1].retired);
  CHECK(state_digest(back) == state_digest(states[1]));
  fs::remove_all(dir);
}

TEST_CASE("restore from an empty directory is a fresh state") {
  const fs::path dir = scratch("empty");
  fs::create_directories(dir);
  const ServerState s = restore(dir, 3, MaskParams(10, 4, 4));
  CHECK(s.share_table.empty());
  CHECK(s.server_id == 3);
  CHECK(restore(dir / "missing", 0, MaskParams()).index_replica.empty());
  fs::remove_all(dir);
}

TEST_CASE("corrupt state files are rejected") {
  const MaskParams params(1000, 8, 2);
  ServerState s(0, params);
  for (std::uint64_t i = 1; i <= 3; ++i) {
    handle_store(s, RecordId{i}, "r", static_cast<Share>(i));
    s.index_replica.insert_at(0, RecordId{i});
  }
  const fs::path dir = scratch("corrupt");
  const auto mangle = [&](const char* file, auto&& edit) {
    persist(s, dir);
    std::ifstream in(dir / file, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    edit(bytes);
    std::ofstream(dir / file, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return code_of([&] { restore(dir, 0, params); });
  };
  CHECK(mangle("shares.odss", [](auto& b) { b.resize(b.size() - 3); }) == ErrorCode::CorruptStateFile);
  CHECK(mangle("shares.odss", [](auto& b) { b[0] = 'Z'; }) == ErrorCode::CorruptStateFile);
  CHECK(mangle("index.odsi", [](auto& b) { b[12] = 9; }) == ErrorCode::CorruptStateFile);
  CHECK(mangle("meta.odsm", [](auto& b) { b.push_back(1); }) == ErrorCode::CorruptStateFile);
  persist(s, dir);
  fs::remove(dir / "index.odsi");
  CHECK(code_of([&] { restore(dir, 0, params); }) == ErrorCode::CorruptStateFile);
  fs::remove_all(dir);
}
