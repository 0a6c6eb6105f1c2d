#include "odes/baseline_ope.hpp"

#include <chrono>
#include <string>

#include "odes/error.hpp"

namespace odes::baseline {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

TokenGenerator::TokenGenerator(std::uint64_t key_seed) : key0_(mix64(key_seed)), key1_(mix64(key_seed ^ 0xA5A5A5A5A5A5A5A5ull)) {}

std::uint64_t TokenGenerator::pad(std::uint64_t nonce) const { return mix64(mix64(nonce ^ key0_) + key1_); }

Token TokenGenerator::seal(std::int64_t value) {
  const std::uint64_t nonce = mix64(++nonce_ ^ key1_);
  const std::uint64_t body = static_cast<std::uint64_t>(value) ^ pad(nonce);
  return Token{(static_cast<u128>(nonce) << 64) | body};
}

std::int64_t TokenGenerator::open(Token token) const {
  const auto nonce = static_cast<std::uint64_t>(token.bits >> 64);
  const auto body = static_cast<std::uint64_t>(token.bits);
  return static_cast<std::int64_t>(body ^ pad(nonce));
}

std::uint64_t Server::lookup_encoding(Token token) {
  ++queries_;
  ++lookups_;
  auto it = by_token_.find(token);
  if (it == by_token_.end()) fail(ErrorCode::UnknownRid, "baseline server has no row for the token");
  return it->second;
}

std::uint64_t Server::lookup_floor() {
  ++queries_;
  ++lookups_;
  return 0;
}

std::uint64_t Server::successor_encoding(std::uint64_t encoding) {
  ++queries_;
  ++lookups_;
  auto it = by_encoding_.upper_bound(encoding);
  return it == by_encoding_.end() ? kCeiling : it->first;
}

void Server::renormalize() {
  ++renormalizations_;
  const std::uint64_t step = kCeiling / (by_encoding_.size() + 2);
  std::map<std::uint64_t, Token> spread;
  std::uint64_t next = step;
  for (const auto& [_, token] : by_encoding_) {
    spread.emplace(next, token);
    by_token_[token] = next;
    next += step;
  }
  by_encoding_ = std::move(spread);
}

void Server::insert_between(Token token, std::uint64_t lower, std::uint64_t upper) {
  ++queries_;
  ++inserts_;
  if (upper - lower < 2) {
    // Locate the neighbors again after re-spreading: the row at `lower` (if
    // any) keeps its relative position.
    const bool has_lower = by_encoding_.contains(lower);
    Token lower_token{};
    if (has_lower) lower_token = by_encoding_.at(lower);
    renormalize();
    lower = has_lower ? by_token_.at(lower_token) : 0;
    auto above = by_encoding_.upper_bound(lower);
    upper = above == by_encoding_.end() ? kCeiling : above->first;
  }
  const std::uint64_t encoding = lower + (upper - lower) / 2;
  by_encoding_.emplace(encoding, token);
  by_token_.emplace(token, encoding);
}

std::vector<Token> Server::tokens_in_rank_range(std::uint64_t lo, std::uint64_t hi) {
  ++queries_;
  std::vector<Token> out;
  std::uint64_t rank = 0;
  for (const auto& [_, token] : by_encoding_) {
    if (rank > hi) break;
    if (rank >= lo) out.push_back(token);
    ++rank;
  }
  return out;
}

std::vector<ServerRow> Server::rows() const {
  std::vector<ServerRow> out;
  out.reserve(by_encoding_.size());
  for (const auto& [encoding, token] : by_encoding_) out.push_back(ServerRow{token, encoding});
  return out;
}

void Client::insert(Server& server, std::int64_t value) {
  params_.check_plaintext(value);
  using Clock = std::chrono::steady_clock;
  const auto ns_since = [](Clock::time_point t) {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t).count());
  };
  auto started = Clock::now();
  // Greatest plaintext <= value; its entry token is the top row of its run.
  auto above = table_.upper_bound(value);
  const bool has_lower = above != table_.begin();
  std::uint64_t lower = 0;
  const Token lower_token = has_lower ? std::prev(above)->second.token : Token{};
  client_ns_ += ns_since(started);
  if (has_lower) {
    lower = server.lookup_encoding(lower_token);
  } else {
    lower = server.lookup_floor();
  }
  const std::uint64_t upper = server.successor_encoding(lower);
  started = Clock::now();
  const Token token = tokens_.seal(value);
  client_ns_ += ns_since(started);
  server.insert_between(token, lower, upper);

  started = Clock::now();
  auto it = table_.try_emplace(value, TableEntry{token, 0}).first;
  it->second.token = token;
  ++it->second.duplicate_count;
  client_ns_ += ns_since(started);
}

std::vector<std::int64_t> Client::query(Server& server, std::uint64_t lo, std::uint64_t hi) const {
  std::vector<std::int64_t> out;
  for (Token t : server.tokens_in_rank_range(lo, hi)) out.push_back(tokens_.open(t));
  return out;
}

}  // namespace odes::baseline
