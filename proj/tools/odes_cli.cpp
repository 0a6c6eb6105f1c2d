// odes: command-line front end for the share-based ordered store.
//
//   odes gen     --table supplier --seed 7 --out supplier.csv
//   odes init    --data supplier.csv --state ./store [--servers 2]
//   odes insert  --state ./store --key K --value V
//   odes query   --state ./store --top-k 1
//   odes compare --state ./store --value 11000 --rank 4
//   odes delete  --state ./store --rid 3
//   odes bench   --table all --scheme odes --servers 2
//
// Exit status: 1 usage or input error, 2 protocol error, 3 I/O error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "odes/client.hpp"
#include "odes/error.hpp"
#include "odes/harness.hpp"
#include "odes/server_node.hpp"
#include "odes/sim_network.hpp"
#include "odes/tcp_transport.hpp"

namespace fs = std::filesystem;
using namespace odes;

namespace {

constexpr const char* kSessionFile = "client.session";

struct Common {
  unsigned servers = MaskParams::kDefaultShareCount;
  unsigned mask_bits = MaskParams::kDefaultMaskBits;
  std::int64_t bound = MaskParams::kDefaultBound;
  std::string transport = "sim";
  std::optional<std::uint64_t> seed;
  std::string state = "odes-state";
};

void add_common(CLI::App& cmd, Common& c, bool with_state = true) {
  cmd.add_option("--servers", c.servers, "Number of share servers m")->capture_default_str();
  cmd.add_option("--mask-bits", c.mask_bits, "Statistical masking parameter sigma")->capture_default_str();
  cmd.add_option("--bound", c.bound, "Plaintext bound M")->capture_default_str();
  cmd.add_option("--transport", c.transport, "sim or tcp")->capture_default_str();
  cmd.add_option("--seed", c.seed, "Seed for deterministic randomness");
  if (with_state) cmd.add_option("--state", c.state, "State directory")->capture_default_str();
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::BoundExceeded:
      return 1;
    case ErrorCode::IoError:
    case ErrorCode::CorruptStateFile:
    case ErrorCode::MalformedIndexFile:
      return 3;
    default:
      return 2;
  }
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

fs::path server_dir(const fs::path& state, std::size_t j) { return state / ("server-" + std::to_string(j)); }

// Restores the cluster from the state directory, runs one client operation
// and writes every server's state back.
class Store {
 public:
  Store(const Common& c, bool creating) : root_(c.state) {
    const fs::path session_path = root_ / kSessionFile;
    std::vector<std::uint8_t> image;
    if (creating) {
      if (fs::exists(session_path)) fail(ErrorCode::ConfigError, root_.string() + " is already initialized");
      params_.emplace(c.bound, c.mask_bits, c.servers);
    } else {
      if (!fs::exists(session_path)) fail(ErrorCode::ConfigError, root_.string() + " is not initialized (run init)");
      image = read_bytes(session_path);
      params_.emplace(ClientSession::deserialize_params(image));
    }
    std::vector<ServerState> states;
    for (unsigned j = 0; j < params_->share_count(); ++j)
      states.push_back(restore(server_dir(root_, j), static_cast<NodeId>(j), *params_));

    tcp_ = harness::parse_transport(c.transport) == harness::TransportKind::Tcp;
    if (tcp_) {
      tcp_cluster_ = std::make_unique<TcpCluster>(std::move(states));
    } else {
      sim_cluster_ = std::make_unique<SimCluster>(std::move(states));
    }
    ClientTransport& transport = tcp_ ? static_cast<ClientTransport&>(*tcp_cluster_) : *sim_cluster_;
    // The session image holds the rid and request counters, so mixing it in
    // keeps a fixed --seed from replaying the same masks across invocations.
    if (c.seed) {
      std::seed_seq seq{static_cast<std::uint32_t>(*c.seed), static_cast<std::uint32_t>(*c.seed >> 32),
                        static_cast<std::uint32_t>(std::hash<std::string>{}(std::string(image.begin(), image.end())))};
      std::uint32_t words[2];
      seq.generate(std::begin(words), std::end(words));
      seeded_ = std::make_unique<SeededRandom>((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
    }
    session_ = std::make_unique<ClientSession>(*params_, transport, rng());
    if (!image.empty()) session_->restore_counters(image);
  }

  ClientSession& session() { return *session_; }

  void commit() {
    std::vector<ServerState> states =
        tcp_ ? std::move(*tcp_cluster_).release() : std::move(*sim_cluster_).release();
    for (const ServerState& s : states) persist(s, server_dir(root_, s.server_id));
    write_bytes(root_ / kSessionFile, session_->serialize());
  }

 private:
  RandomSource& rng() { return seeded_ ? static_cast<RandomSource&>(*seeded_) : entropy_; }

  fs::path root_;
  std::optional<MaskParams> params_;
  bool tcp_ = false;
  std::unique_ptr<SimCluster> sim_cluster_;
  std::unique_ptr<TcpCluster> tcp_cluster_;
  EntropyRandom entropy_;
  std::unique_ptr<SeededRandom> seeded_;
  std::unique_ptr<ClientSession> session_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Order-preserving storage over additive secret shares"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic table as key,value CSV");
  std::string gen_table;
  std::string gen_out;
  gen->add_option("--table", gen_table, "supplier, customer, part or orders")->required();
  gen->add_option("--out", gen_out, "Output CSV")->required();
  add_common(*gen, common, false);

  auto* init = app.add_subcommand("init", "Share a CSV dataset across fresh servers");
  std::string init_data;
  init->add_option("--data", init_data, "key,value CSV")->required();
  add_common(*init, common);

  auto* insert = app.add_subcommand("insert", "Insert one record");
  std::string insert_key;
  std::int64_t insert_value = 0;
  std::string insert_format = "human";
  insert->add_option("--key", insert_key, "Record key")->required();
  insert->add_option("--value", insert_value, "Integer value")->required();
  insert->add_option("--format", insert_format, "human or csv")->capture_default_str();
  add_common(*insert, common);

  auto* query = app.add_subcommand("query", "Reconstruct records selected by rank");
  std::optional<std::uint64_t> top_k;
  std::optional<std::uint64_t> bottom_k;
  std::vector<std::uint64_t> range;
  bool all = false;
  std::string query_out;
  query->add_option("--top-k", top_k, "Largest k records");
  query->add_option("--bottom-k", bottom_k, "Smallest k records");
  query->add_option("--range", range, "Inclusive rank range LO HI")->expected(2);
  query->add_flag("--all", all, "Every record");
  query->add_option("--out", query_out, "Write rank,key,value CSV here instead of stdout");
  add_common(*query, common);

  auto* compare = app.add_subcommand("compare", "Compare a value against the record at a rank");
  std::int64_t compare_value = 0;
  std::uint64_t compare_rank = 0;
  compare->add_option("--value", compare_value, "Integer value")->required();
  compare->add_option("--rank", compare_rank, "Rank of the stored record")->required();
  add_common(*compare, common);

  auto* del = app.add_subcommand("delete", "Delete a record by id");
  std::uint64_t delete_rid = 0;
  del->add_option("--rid", delete_rid, "Record id")->required();
  add_common(*del, common);

  auto* bench = app.add_subcommand("bench", "Insert a table from empty, then run log(n) rank queries");
  std::string bench_table = "all";
  std::string bench_scheme = "odes";
  std::string bench_out;
  std::string bench_data;
  bench->add_option("--table", bench_table, "Table name or 'all'")->capture_default_str();
  bench->add_option("--scheme", bench_scheme, "odes or baseline")->capture_default_str();
  bench->add_option("--out", bench_out, "Metrics CSV path (stdout if omitted)");
  bench->add_option("--data", bench_data, "Use this key,value CSV instead of a generated table");
  add_common(*bench, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) {
      const auto spec = harness::table_spec(gen_table);
      const auto rows = harness::generate_table(spec, common.bound, common.seed.value_or(1));
      harness::write_dataset_csv(gen_out, rows);
      std::cout << "wrote " << rows.size() << " rows to " << gen_out << "\n";
    } else if (init->parsed()) {
      Store store(common, true);
      const auto rows = harness::read_dataset_csv(init_data, store.session().params());
      store.session().init_dataset(rows);
      store.commit();
      std::cout << "initialized " << rows.size() << " records across " << store.session().params().share_count()
                << " servers\n";
    } else if (insert->parsed()) {
      Store store(common, false);
      const auto receipt = store.session().insert_record(insert_key, insert_value);
      store.commit();
      if (insert_format == "csv") {
        std::cout << "rid,rank,delta_rounds\n" << receipt.rid.value << ',' << receipt.rank << ',' << receipt.delta_rounds << "\n";
      } else {
        std::cout << "inserted rid=" << receipt.rid.value << " rank=" << receipt.rank
                  << " delta_rounds=" << receipt.delta_rounds << "\n";
      }
    } else if (query->parsed()) {
      const int chosen = int(top_k.has_value()) + int(bottom_k.has_value()) + int(!range.empty()) + int(all);
      if (chosen != 1) fail(ErrorCode::ConfigError, "choose exactly one of --top-k, --bottom-k, --range, --all");
      const RankPredicate pred = top_k      ? RankPredicate::top_k(*top_k)
                                 : bottom_k ? RankPredicate::bottom_k(*bottom_k)
                                 : all      ? RankPredicate::all()
                                            : RankPredicate::range(range[0], range[1]);
      Store store(common, false);
      const auto rows = store.session().query_ranks(pred);
      store.commit();
      if (query_out.empty()) {
        harness::write_results_csv(std::cout, rows);
      } else {
        std::ofstream out(query_out, std::ios::trunc);
        if (!out) fail(ErrorCode::IoError, "cannot write " + query_out);
        harness::write_results_csv(out, rows);
      }
    } else if (compare->parsed()) {
      Store store(common, false);
      const Ordering o = store.session().compare_ephemeral(compare_value, compare_rank);
      store.commit();
      std::cout << to_string(o) << "\n";
    } else if (del->parsed()) {
      Store store(common, false);
      store.session().delete_record(RecordId{delete_rid});
      store.commit();
      std::cout << "deleted rid=" << delete_rid << "\n";
    } else if (bench->parsed()) {
      std::vector<harness::SyntheticTableSpec> tables;
      if (bench_table == "all") {
        tables = harness::standard_tables();
      } else {
        tables.push_back(harness::table_spec(bench_table));
      }
      std::ofstream file;
      if (!bench_out.empty()) {
        file.open(bench_out, std::ios::trunc);
        if (!file) fail(ErrorCode::IoError, "cannot write " + bench_out);
      }
      std::ostream& out = bench_out.empty() ? std::cout : file;
      out << harness::kMetricsHeader << "\n";
      for (const auto& table : tables) {
        harness::BenchConfig config;
        config.table = table;
        config.servers = common.servers;
        config.mask_bits = common.mask_bits;
        config.bound = common.bound;
        config.scheme = harness::parse_scheme(bench_scheme);
        config.transport = harness::parse_transport(common.transport);
        config.seed = common.seed.value_or(1);
        if (!bench_data.empty()) {
          config.data = harness::read_dataset_csv(bench_data, MaskParams(common.bound, common.mask_bits, common.servers));
          config.table.rows = config.data->size();
        }
        out << harness::metrics_row(harness::run_bench(config)) << "\n" << std::flush;
      }
    }
  } catch (const Error& e) {
    std::cerr << "odes: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "odes: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
