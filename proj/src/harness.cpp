#include "odes/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "odes/baseline_ope.hpp"
#include "odes/error.hpp"
#include "odes/sim_network.hpp"
#include "odes/tcp_transport.hpp"

namespace odes::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t ns_since(Clock::time_point t) {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t).count());
}

std::uint64_t ceil_log2(std::size_t n) {
  std::uint64_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  return bits;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

const std::vector<SyntheticTableSpec>& standard_tables() {
  static const std::vector<SyntheticTableSpec> tables = {
      {"supplier", 100}, {"customer", 1500}, {"part", 2000}, {"orders", 15000}};
  return tables;
}

SyntheticTableSpec table_spec(std::string_view name) {
  for (const auto& t : standard_tables())
    if (t.name == name) return t;
  fail(ErrorCode::ConfigError, "unknown table '" + std::string(name) + "' (supplier, customer, part, orders)");
}

std::vector<KeyValue> generate_table(const SyntheticTableSpec& spec, std::int64_t bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> dist(-bound, bound);
  std::vector<KeyValue> rows;
  rows.reserve(spec.rows);
  for (std::size_t i = 0; i < spec.rows; ++i) rows.push_back(KeyValue{spec.name + "-" + std::to_string(i), dist(rng)});
  return rows;
}

void write_dataset_csv(std::ostream& out, const std::vector<KeyValue>& rows) {
  out << "key,value\n";
  for (const auto& kv : rows) out << kv.key << ',' << kv.value << '\n';
}

void write_dataset_csv(const std::filesystem::path& path, const std::vector<KeyValue>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  write_dataset_csv(out, rows);
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<KeyValue> read_dataset_csv(std::istream& in, const MaskParams& params) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "key,value")
    fail(ErrorCode::ConfigError, "dataset must start with the header 'key,value'");
  std::vector<KeyValue> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    const auto comma = text.rfind(',');
    if (comma == std::string_view::npos || comma == 0)
      fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key,value");
    const std::string_view value_text = trim(text.substr(comma + 1));
    const auto value = parse_i128(value_text);
    if (!value) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": '" + std::string(value_text) + "' is not an integer");
    if (*value > params.plaintext_bound() || *value < -params.plaintext_bound())
      fail(ErrorCode::BoundExceeded, "line " + std::to_string(line_no) + ": value " + std::string(value_text) +
                                         " exceeds the plaintext bound M=" + std::to_string(params.plaintext_bound()));
    rows.push_back(KeyValue{std::string(trim(text.substr(0, comma))), static_cast<std::int64_t>(*value)});
  }
  return rows;
}

std::vector<KeyValue> read_dataset_csv(const std::filesystem::path& path, const MaskParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  return read_dataset_csv(in, params);
}

void write_results_csv(std::ostream& out, const std::vector<RankedRecord>& rows, bool header) {
  if (header) out << "rank,key,value\n";
  for (std::size_t i = 0; i < rows.size(); ++i) out << i << ',' << rows[i].key << ',' << rows[i].value << '\n';
}

std::string_view to_string(Scheme s) { return s == Scheme::Odes ? "odes" : "baseline"; }
std::string_view to_string(TransportKind t) { return t == TransportKind::Sim ? "sim" : "tcp"; }

Scheme parse_scheme(std::string_view s) {
  if (s == "odes") return Scheme::Odes;
  if (s == "baseline") return Scheme::Baseline;
  fail(ErrorCode::ConfigError, "unknown scheme '" + std::string(s) + "'");
}

TransportKind parse_transport(std::string_view s) {
  if (s == "sim") return TransportKind::Sim;
  if (s == "tcp") return TransportKind::Tcp;
  fail(ErrorCode::ConfigError, "unknown transport '" + std::string(s) + "'");
}

std::string metrics_row(const WorkloadMetrics& m) {
  std::ostringstream out;
  out << m.scheme << ',' << m.table << ',' << m.m << ',' << m.rows << ',' << m.client_overhead_ns << ','
      << m.insert_ns << ',' << m.query_ns << ',' << m.delta_rounds_total << ',' << m.messages_total << ','
      << m.server_storage_bytes << ',' << m.client_state_bytes;
  return out.str();
}

std::string metrics_row_without_timing(const WorkloadMetrics& m) {
  std::ostringstream out;
  out << m.scheme << ',' << m.table << ',' << m.m << ',' << m.rows << ",-,-,-," << m.delta_rounds_total << ','
      << m.messages_total << ',' << m.server_storage_bytes << ',' << m.client_state_bytes;
  return out.str();
}

std::uint64_t insert_round_bound(std::size_t n) { return n == 0 ? 0 : ceil_log2(n) + 1; }

namespace {

std::vector<std::int64_t> sorted_values(const std::vector<KeyValue>& rows) {
  std::vector<std::int64_t> values;
  values.reserve(rows.size());
  for (const auto& kv : rows) values.push_back(kv.value);
  std::sort(values.begin(), values.end());
  return values;
}

template <typename Cluster>
void run_odes_workload(Cluster& cluster, const MaskParams& params, const BenchConfig& config,
                       const std::vector<KeyValue>& rows, WorkloadMetrics& metrics) {
  SeededRandom rng(config.seed);
  ClientSession session(params, cluster, rng);
  std::size_t n = 0;
  for (const auto& kv : rows) {
    const auto started = Clock::now();
    const InsertReceipt receipt = session.insert_record(kv.key, kv.value);
    metrics.insert_ns += ns_since(started);
    metrics.per_insert_rounds.push_back(receipt.delta_rounds);
    metrics.per_insert_size.push_back(n++);
  }
  std::mt19937_64 query_rng(config.seed ^ 0x51ED270B27A3F3C1ull);
  const std::uint64_t queries = ceil_log2(rows.size());
  for (std::uint64_t q = 0; q < queries && !rows.empty(); ++q) {
    const auto rank = std::uniform_int_distribution<std::uint64_t>(0, rows.size() - 1)(query_rng);
    const auto started = Clock::now();
    session.query_ranks(RankPredicate::range(rank, rank));
    metrics.query_ns += ns_since(started);
  }
  metrics.client_overhead_ns = session.stats().compute_ns;
  metrics.delta_rounds_total = session.stats().delta_rounds;
  metrics.messages_total = cluster.messages_delivered();
  metrics.client_state_bytes = session.serialize().size();

  const auto all = session.query_ranks(RankPredicate::all());
  std::vector<std::int64_t> got;
  got.reserve(all.size());
  for (const auto& r : all) got.push_back(r.value);
  metrics.order_verified = got == sorted_values(rows);
}

}  // namespace

WorkloadMetrics run_bench(const BenchConfig& config) {
  const MaskParams params(config.bound, config.mask_bits, config.servers);
  const std::vector<KeyValue> rows = config.data ? *config.data : generate_table(config.table, config.bound, config.seed);
  WorkloadMetrics metrics;
  metrics.scheme = std::string(to_string(config.scheme));
  metrics.table = config.table.name;
  metrics.m = config.scheme == Scheme::Odes ? config.servers : 1;
  metrics.rows = rows.size();

  if (config.scheme == Scheme::Baseline) {
    baseline::Server server;
    baseline::Client client(params, config.seed);
    for (const auto& kv : rows) {
      const auto started = Clock::now();
      client.insert(server, kv.value);
      metrics.insert_ns += ns_since(started);
    }
    std::mt19937_64 query_rng(config.seed ^ 0x51ED270B27A3F3C1ull);
    const std::uint64_t queries = ceil_log2(rows.size());
    for (std::uint64_t q = 0; q < queries && !rows.empty(); ++q) {
      const auto rank = std::uniform_int_distribution<std::uint64_t>(0, rows.size() - 1)(query_rng);
      const auto started = Clock::now();
      client.query(server, rank, rank);
      metrics.query_ns += ns_since(started);
    }
    metrics.client_overhead_ns = client.client_ns();
    metrics.messages_total = server.query_count();
    metrics.server_storage_bytes = server.storage_bytes();
    metrics.client_state_bytes = client.client_size();
    const auto all = rows.empty() ? std::vector<std::int64_t>{} : client.query(server, 0, rows.size() - 1);
    metrics.order_verified = all == sorted_values(rows);
  } else if (config.transport == TransportKind::Sim) {
    SimOptions options;
    options.record_transcript = false;
    SimCluster cluster(params, options);
    run_odes_workload(cluster, params, config, rows, metrics);
    metrics.server_storage_bytes = storage_bytes(cluster.node(0).state());
  } else {
    TcpCluster cluster(params);
    run_odes_workload(cluster, params, config, rows, metrics);
    const auto states = std::move(cluster).release();
    metrics.server_storage_bytes = storage_bytes(states.front());
  }

  if (!metrics.order_verified)
    fail(ErrorCode::ReplicaDivergence, "final order of table " + config.table.name + " does not match the sorted input");
  return metrics;
}

}  // namespace odes::harness
