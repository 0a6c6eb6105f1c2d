#pragma once

// Stateful order-preserving baseline in the style of frequency-hiding OPE
// schemes with a client-side plaintext table. It exists to compare client
// state, query counts and storage against the share-based scheme.
//
// Tokens come from a seedable keyed mixing function. It is NOT a cipher and
// offers no security; it only gives fixed-width opaque values that the
// client can open again.

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "odes/int128.hpp"
#include "odes/sharing.hpp"

namespace odes::baseline {

struct Token {
  u128 bits = 0;
  friend bool operator==(const Token&, const Token&) = default;
};

class TokenGenerator {
 public:
  explicit TokenGenerator(std::uint64_t key_seed);

  // Fresh nonce per call, so equal plaintexts get unrelated tokens.
  Token seal(std::int64_t value);
  std::int64_t open(Token token) const;

 private:
  std::uint64_t pad(std::uint64_t nonce) const;

  std::uint64_t key0_;
  std::uint64_t key1_;
  std::uint64_t nonce_ = 0;
};

struct ServerRow {
  Token token;
  std::uint64_t encoding = 0;
};

// Server side: rows ordered by encoding. Every public call is one query
// and is counted.
class Server {
 public:
  static constexpr std::uint64_t kCeiling = std::uint64_t{1} << 62;

  // Encoding of the row holding `token`.
  std::uint64_t lookup_encoding(Token token);
  // Floor sentinel lookup used when the new value has no lower neighbor.
  std::uint64_t lookup_floor();
  // Encoding of the row right above `encoding`, or kCeiling.
  std::uint64_t successor_encoding(std::uint64_t encoding);
  // Inserts strictly between two encodings, re-spreading all encodings when
  // no integer gap is left.
  void insert_between(Token token, std::uint64_t lower, std::uint64_t upper);
  std::vector<Token> tokens_in_rank_range(std::uint64_t lo, std::uint64_t hi);

  std::vector<ServerRow> rows() const;
  std::size_t size() const { return by_encoding_.size(); }
  std::uint64_t query_count() const { return queries_; }
  std::uint64_t lookup_count() const { return lookups_; }
  std::uint64_t insert_count() const { return inserts_; }
  std::uint64_t renormalizations() const { return renormalizations_; }
  // Each row: 16-byte token + 8-byte encoding.
  std::size_t storage_bytes() const { return 24 * by_encoding_.size(); }

 private:
  struct TokenHash {
    std::size_t operator()(const Token& t) const {
      return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(t.bits) ^
                                        static_cast<std::uint64_t>(t.bits >> 64) * 0x9E3779B97F4A7C15ull);
    }
  };

  void renormalize();

  std::map<std::uint64_t, Token> by_encoding_;
  std::unordered_map<Token, std::uint64_t, TokenHash> by_token_;
  std::uint64_t queries_ = 0;
  std::uint64_t lookups_ = 0;
  std::uint64_t inserts_ = 0;
  std::uint64_t renormalizations_ = 0;
};

struct TableEntry {
  Token token;  // most recently inserted row of this plaintext (highest encoding)
  std::uint32_t duplicate_count = 0;
};

class Client {
 public:
  // 128-bit token plus 32-bit counter per distinct plaintext.
  static constexpr std::size_t kEntryBytes = (128 + 32) / 8;

  Client(MaskParams params, std::uint64_t key_seed) : params_(params), tokens_(key_seed) {}

  // Two neighbor lookups, then one insert.
  void insert(Server& server, std::int64_t value);
  std::vector<std::int64_t> query(Server& server, std::uint64_t lo, std::uint64_t hi) const;
  std::int64_t open(Token t) const { return tokens_.open(t); }

  const std::map<std::int64_t, TableEntry>& table() const { return table_; }
  std::size_t client_size() const { return table_.size() * kEntryBytes; }
  // Time spent on client-side table maintenance and token generation.
  std::uint64_t client_ns() const { return client_ns_; }

 private:
  std::uint64_t client_ns_ = 0;
  MaskParams params_;
  TokenGenerator tokens_;
  std::map<std::int64_t, TableEntry> table_;
};

}  // namespace odes::baseline
