#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odes/client.hpp"
#include "odes/sharing.hpp"

namespace odes::harness {

// Synthetic stand-ins for four TPC-H tables; row counts are fixed per name.
struct SyntheticTableSpec {
  std::string name;
  std::size_t rows = 0;
};

const std::vector<SyntheticTableSpec>& standard_tables();
SyntheticTableSpec table_spec(std::string_view name);

// Keys "<name>-<row>", values uniform over [-bound, bound].
std::vector<KeyValue> generate_table(const SyntheticTableSpec& spec, std::int64_t bound, std::uint64_t seed);

// CSV with a `key,value` header.
void write_dataset_csv(std::ostream& out, const std::vector<KeyValue>& rows);
std::vector<KeyValue> read_dataset_csv(std::istream& in, const MaskParams& params);
std::vector<KeyValue> read_dataset_csv(const std::filesystem::path& path, const MaskParams& params);
void write_dataset_csv(const std::filesystem::path& path, const std::vector<KeyValue>& rows);

// `rank,key,value`; rank is the 0-based position in the result list.
void write_results_csv(std::ostream& out, const std::vector<RankedRecord>& rows, bool header = true);

enum class Scheme { Odes, Baseline };
enum class TransportKind { Sim, Tcp };

std::string_view to_string(Scheme s);
std::string_view to_string(TransportKind t);
Scheme parse_scheme(std::string_view s);
TransportKind parse_transport(std::string_view s);

struct WorkloadMetrics {
  std::string scheme;
  std::string table;
  std::size_t m = 0;
  std::size_t rows = 0;
  std::uint64_t client_overhead_ns = 0;
  std::uint64_t insert_ns = 0;
  std::uint64_t query_ns = 0;
  std::uint64_t delta_rounds_total = 0;
  std::uint64_t messages_total = 0;
  std::uint64_t server_storage_bytes = 0;  // one server
  std::uint64_t client_state_bytes = 0;
  // Not part of the CSV row.
  std::vector<std::uint64_t> per_insert_rounds;
  std::vector<std::size_t> per_insert_size;
  bool order_verified = false;
};

inline constexpr std::string_view kMetricsHeader =
    "scheme,table,m,rows,client_overhead_ns,insert_ns,query_ns,delta_rounds,messages,server_bytes,client_bytes";

std::string metrics_row(const WorkloadMetrics& m);
// Same row with every wall-clock column replaced by "-".
std::string metrics_row_without_timing(const WorkloadMetrics& m);

struct BenchConfig {
  SyntheticTableSpec table;
  unsigned servers = MaskParams::kDefaultShareCount;
  unsigned mask_bits = MaskParams::kDefaultMaskBits;
  std::int64_t bound = MaskParams::kDefaultBound;
  Scheme scheme = Scheme::Odes;
  TransportKind transport = TransportKind::Sim;
  std::uint64_t seed = 1;
  // Optional pre-built dataset; generated from `table` when empty.
  std::optional<std::vector<KeyValue>> data;
};

// Inserts every row into an empty store, then runs ceil(log2 n) random
// single-rank queries. A final all-ranks query is checked against a sorted
// copy of the input; a mismatch raises ReplicaDivergence.
WorkloadMetrics run_bench(const BenchConfig& config);

// ceil(log2 n) + 1 for n >= 1, 0 for an empty table.
std::uint64_t insert_round_bound(std::size_t n);

}  // namespace odes::harness
