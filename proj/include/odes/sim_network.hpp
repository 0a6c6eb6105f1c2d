#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "odes/server_node.hpp"
#include "odes/transport.hpp"

namespace odes {

struct SimOptions {
  // When set, the next delivery is drawn at random (seeded) among the
  // per-pair queues instead of global send order. Per-pair FIFO holds
  // either way.
  bool shuffle_schedule = false;
  std::uint64_t schedule_seed = 0;
  // Virtual latency per delivery; affects simulated_time_ns() only.
  std::uint64_t latency_ns = 0;
  std::uint64_t jitter_ns = 0;
  // Compare index replicas and search traces whenever the network drains.
  bool check_replicas = true;
  bool record_transcript = true;
};

// Deterministic in-process cluster: m ServerNodes plus the client's inbox,
// connected by per-pair FIFO queues. A node whose round cannot complete
// because the network has drained hits its round deadline immediately.
class SimCluster final : public ClientTransport {
 public:
  SimCluster(std::vector<ServerState> states, SimOptions options = {});
  SimCluster(const MaskParams& params, SimOptions options = {});

  std::size_t server_count() const override { return nodes_.size(); }
  void send(NodeId server, const ServerMessage& msg) override;
  void broadcast(const ServerMessage& msg) override;
  Received receive() override;
  void settle() override;
  std::uint64_t messages_delivered() const override { return delivered_; }

  // Delivers queued messages until none remain.
  void run_until_idle();
  // ReplicaDivergence if index replicas or the last search traces differ.
  void verify_replicas() const;

  // Silenced nodes receive messages but everything they send is dropped.
  void mute(NodeId server) { muted_.insert(server); }
  void unmute(NodeId server) { muted_.erase(server); }

  // Send log in send order, one envelope per recipient copy.
  const std::vector<Envelope>& transcript() const { return transcript_; }
  void clear_transcript() { transcript_.clear(); }

  const ServerNode& node(NodeId server) const { return nodes_.at(server); }
  std::uint64_t simulated_time_ns() const { return sim_time_ns_; }
  // Concatenated per-server state digests.
  std::string state_hash() const;
  std::vector<ServerState> release() &&;

 private:
  struct Pending {
    std::uint64_t order = 0;
    Envelope envelope;
  };

  void enqueue(NodeId sender, NodeId recipient, const ServerMessage& msg);
  void dispatch(NodeId sender, std::vector<Outgoing> outgoing);
  bool deliver_one();
  bool fire_deadlines();

  SimOptions options_;
  std::vector<ServerNode> nodes_;
  std::map<std::pair<NodeId, NodeId>, std::deque<Pending>> queues_;
  std::deque<Received> client_inbox_;
  std::map<NodeId, std::uint64_t> next_seq_;
  std::vector<Envelope> transcript_;
  std::set<NodeId> muted_;
  std::mt19937_64 schedule_rng_;
  std::uint64_t order_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t sim_time_ns_ = 0;
  std::size_t queued_ = 0;
};

}  // namespace odes
