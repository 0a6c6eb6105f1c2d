#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odes/messages.hpp"
#include "odes/round_barrier.hpp"

namespace odes {

using NodeId = std::uint16_t;

inline constexpr NodeId kClientNode = 0xFFFF;
inline constexpr NodeId kBroadcast = 0xFFFE;

struct Envelope {
  NodeId sender = 0;
  NodeId recipient = 0;
  std::uint64_t seq = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

struct Received {
  NodeId sender = 0;
  ServerMessage msg;
};

// The client's view of a cluster: point-to-point sends to servers and a
// single inbox of replies.
class ClientTransport {
 public:
  virtual ~ClientTransport() = default;

  virtual std::size_t server_count() const = 0;
  // UnknownRecipient if `server` is not a registered server id.
  virtual void send(NodeId server, const ServerMessage& msg) = 0;
  virtual void broadcast(const ServerMessage& msg);
  // Next message addressed to the client; ProtocolTimeout if none can arrive.
  virtual Received receive() = 0;
  // Called after every client operation. Implementations may drain in-flight
  // traffic and check replica agreement here.
  virtual void settle() {}

  // Messages delivered between distinct nodes so far.
  virtual std::uint64_t messages_delivered() const = 0;
};

}  // namespace odes
