#include "odes/sim_network.hpp"

#include <string>

#include "odes/error.hpp"

namespace odes {

namespace {

std::vector<ServerState> fresh_states(const MaskParams& params) {
  std::vector<ServerState> states;
  for (unsigned j = 0; j < params.share_count(); ++j) states.emplace_back(static_cast<NodeId>(j), params);
  return states;
}

}  // namespace

SimCluster::SimCluster(std::vector<ServerState> states, SimOptions options)
    : options_(options), schedule_rng_(options.schedule_seed) {
  if (states.empty()) fail(ErrorCode::ConfigError, "cluster needs at least one server");
  const std::size_t m = states.front().params.share_count();
  if (states.size() != m)
    fail(ErrorCode::ConfigError, "expected " + std::to_string(m) + " server states, got " + std::to_string(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (states[j].server_id != j) fail(ErrorCode::ConfigError, "server states out of order");
    nodes_.emplace_back(std::move(states[j]));
  }
}

SimCluster::SimCluster(const MaskParams& params, SimOptions options)
    : SimCluster(fresh_states(params), options) {}

void SimCluster::enqueue(NodeId sender, NodeId recipient, const ServerMessage& msg) {
  if (muted_.contains(sender)) return;
  if (recipient != kClientNode && recipient != kBroadcast && recipient >= nodes_.size())
    fail(ErrorCode::UnknownRecipient, "node " + std::to_string(recipient));

  // A broadcast becomes one envelope per server, each with its own seq.
  const std::vector<std::uint8_t> payload = encode(msg);
  const auto push = [&](NodeId to) {
    Envelope env{sender, to, next_seq_[sender]++, payload};
    if (options_.record_transcript) transcript_.push_back(env);
    queues_[{sender, to}].push_back(Pending{order_++, std::move(env)});
    ++queued_;
  };
  if (recipient == kBroadcast) {
    for (std::size_t j = 0; j < nodes_.size(); ++j) push(static_cast<NodeId>(j));
  } else {
    push(recipient);
  }
}

void SimCluster::send(NodeId server, const ServerMessage& msg) {
  if (server >= nodes_.size()) fail(ErrorCode::UnknownRecipient, "server " + std::to_string(server));
  enqueue(kClientNode, server, msg);
}

void SimCluster::broadcast(const ServerMessage& msg) { enqueue(kClientNode, kBroadcast, msg); }

void SimCluster::dispatch(NodeId sender, std::vector<Outgoing> outgoing) {
  for (Outgoing& out : outgoing) enqueue(sender, out.to, out.msg);
}

bool SimCluster::deliver_one() {
  if (queued_ == 0) return false;
  auto pick = queues_.end();
  if (options_.shuffle_schedule) {
    std::vector<decltype(pick)> ready;
    for (auto it = queues_.begin(); it != queues_.end(); ++it)
      if (!it->second.empty()) ready.push_back(it);
    pick = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(schedule_rng_)];
  } else {
    for (auto it = queues_.begin(); it != queues_.end(); ++it)
      if (!it->second.empty() && (pick == queues_.end() || it->second.front().order < pick->second.front().order))
        pick = it;
  }
  const NodeId to = pick->first.second;
  Pending item = std::move(pick->second.front());
  pick->second.pop_front();
  --queued_;

  const Envelope& env = item.envelope;
  if (env.sender != to) ++delivered_;
  sim_time_ns_ += options_.latency_ns;
  if (options_.jitter_ns != 0)
    sim_time_ns_ += std::uniform_int_distribution<std::uint64_t>(0, options_.jitter_ns)(schedule_rng_);

  ServerMessage msg = decode(env.payload);
  if (to == kClientNode) {
    client_inbox_.push_back(Received{env.sender, std::move(msg)});
  } else {
    dispatch(to, nodes_[to].handle(env.sender, msg));
  }
  return true;
}

bool SimCluster::fire_deadlines() {
  bool fired = false;
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    if (!nodes_[j].awaiting_round()) continue;
    dispatch(static_cast<NodeId>(j), nodes_[j].abort_pending());
    fired = true;
  }
  return fired;
}

Received SimCluster::receive() {
  while (client_inbox_.empty()) {
    if (deliver_one()) continue;
    if (fire_deadlines()) continue;
    fail(ErrorCode::ProtocolTimeout, "network drained with no reply for the client");
  }
  Received msg = std::move(client_inbox_.front());
  client_inbox_.pop_front();
  return msg;
}

void SimCluster::run_until_idle() {
  while (deliver_one()) {
  }
}

void SimCluster::settle() {
  run_until_idle();
  if (options_.check_replicas) verify_replicas();
}

void SimCluster::verify_replicas() const {
  const auto reference = nodes_.front().state().index_replica.serialize();
  for (std::size_t j = 1; j < nodes_.size(); ++j) {
    if (nodes_[j].state().index_replica.serialize() != reference)
      fail(ErrorCode::ReplicaDivergence, "index replica of server " + std::to_string(j) + " differs from server 0");
    if (nodes_[j].last_trace() != nodes_.front().last_trace())
      fail(ErrorCode::ReplicaDivergence, "server " + std::to_string(j) + " took a different search path");
  }
}

std::string SimCluster::state_hash() const {
  std::string out;
  for (const ServerNode& node : nodes_) {
    if (!out.empty()) out.push_back(':');
    out += state_digest(node.state());
  }
  return out;
}

std::vector<ServerState> SimCluster::release() && {
  std::vector<ServerState> states;
  for (ServerNode& node : nodes_) states.push_back(std::move(node).release());
  return states;
}

}  // namespace odes
