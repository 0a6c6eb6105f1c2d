#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "odes/error.hpp"
#include "odes/order_index.hpp"

using namespace odes;

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

std::vector<std::uint64_t> raw(const OrderIndex& idx) {
  std::vector<std::uint64_t> out;
  for (RecordId r : idx.ranks()) out.push_back(r.value);
  return out;
}

}  // namespace

TEST_CASE("insert, lookup and remove shift ranks") {
  OrderIndex idx;
  idx.insert_at(0, RecordId{10});
  idx.insert_at(1, RecordId{30});
  idx.insert_at(1, RecordId{20});
  CHECK(raw(idx) == std::vector<std::uint64_t>{10, 20, 30});
  CHECK(idx.lookup(2) == RecordId{30});
  CHECK(idx.rank_of(RecordId{20}) == 1);
  CHECK(idx.remove(RecordId{10}) == 0);
  CHECK(raw(idx) == std::vector<std::uint64_t>{20, 30});
  CHECK_FALSE(idx.contains(RecordId{10}));
  idx.insert_at(2, RecordId{10});
  CHECK(idx.lookup(2) == RecordId{10});
}

TEST_CASE("error cases") {
  OrderIndex idx(std::vector<RecordId>{{1}, {2}});
  CHECK(code_of([&] { idx.lookup(2); }) == ErrorCode::RankOutOfBounds);
  CHECK(code_of([&] { idx.insert_at(3, RecordId{9}); }) == ErrorCode::RankOutOfBounds);
  CHECK(code_of([&] { idx.insert_at(0, RecordId{2}); }) == ErrorCode::DuplicateRid);
  CHECK(code_of([&] { idx.remove(RecordId{7}); }) == ErrorCode::UnknownRid);
  CHECK(code_of([&] { idx.rank_of(RecordId{7}); }) == ErrorCode::UnknownRid);
  CHECK(code_of([] { OrderIndex(std::vector<RecordId>{{4}, {4}}); }) == ErrorCode::DuplicateRid);
  CHECK(raw(idx) == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("serialization is bit exact") {
  const OrderIndex idx(std::vector<RecordId>{{1}, {0x0102030405060708}});
  const std::vector<std::uint8_t> expected = {
      'O', 'D', 'S', 'I', 0x01,                         // magic, version
      0, 0, 0, 0, 0, 0, 0, 2,                           // count
      0, 0, 0, 0, 0, 0, 0, 1,                           // rank 0
      0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08};  // rank 1
  CHECK(idx.serialize() == expected);
  CHECK(OrderIndex::deserialize(expected) == idx);
  CHECK(OrderIndex().serialize().size() == 13);
}

TEST_CASE("malformed index files are rejected") {
  const auto good = OrderIndex(std::vector<RecordId>{{5}, {6}, {7}}).serialize();
  auto bad_magic = good;
  bad_magic[0] = 'X';
  auto bad_version = good;
  bad_version[4] = 0x02;
  auto short_payload = good;
  short_payload.pop_back();
  auto long_count = good;
  long_count[12] = 4;
  auto dup = good;
  dup[13 + 8 + 7] = 5;
  for (const auto& bytes : {bad_magic, bad_version, short_payload, long_count, dup})
    CHECK(code_of([&] { OrderIndex::deserialize(bytes); }) == ErrorCode::MalformedIndexFile);
  CHECK(code_of([] { OrderIndex::deserialize(std::vector<std::uint8_t>{'O', 'D'}); }) ==
        ErrorCode::MalformedIndexFile);
}

TEST_CASE("property: random mutations track a reference vector") {
  std::mt19937_64 rng(4);
  OrderIndex idx;
  std::vector<std::uint64_t> model;
  std::uint64_t next = 1;
  for (int step = 0; step < 3000; ++step) {
    if (model.empty() || rng() % 3 != 0) {
      const std::size_t rank = rng() % (model.size() + 1);
      idx.insert_at(rank, RecordId{next});
      model.insert(model.begin() + static_cast<std::ptrdiff_t>(rank), next);
      ++next;
    } else {
      const std::uint64_t victim = model[rng() % model.size()];
      const auto it = std::find(model.begin(), model.end(), victim);
      REQUIRE(idx.remove(RecordId{victim}) == static_cast<std::size_t>(it - model.begin()));
      model.erase(it);
    }
    REQUIRE(raw(idx) == model);
  }
  REQUIRE(OrderIndex::deserialize(idx.serialize()) == idx);
}
