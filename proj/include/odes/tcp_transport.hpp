#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odes/server_node.hpp"
#include "odes/transport.hpp"

namespace odes {

inline constexpr std::string_view kHandshakeMagic = "ODESWP01";
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

// Frame: u32-BE payload length, then the payload (message type byte and
// fields). Both throw ConnectionLost on a closed or failing socket.
void write_frame(int fd, std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> read_frame(int fd);

// Handshake: the connecting side sends magic + its u16 node id, the
// accepting side answers with magic + its own id. Returns the peer's id.
NodeId handshake_connect(int fd, NodeId self);
NodeId handshake_accept(int fd, NodeId self);

struct TcpOptions {
  std::chrono::milliseconds round_timeout{5000};
  std::chrono::milliseconds client_timeout{5000};
};

// Loopback cluster: every server runs its sequential message loop on its own
// thread, with one duplex TCP connection per node pair (full mesh among the
// servers plus one connection from the client to each server).
class TcpCluster final : public ClientTransport {
 public:
  TcpCluster(std::vector<ServerState> states, TcpOptions options = {});
  explicit TcpCluster(const MaskParams& params, TcpOptions options = {});
  ~TcpCluster() override;

  TcpCluster(const TcpCluster&) = delete;
  TcpCluster& operator=(const TcpCluster&) = delete;

  std::size_t server_count() const override;
  void send(NodeId server, const ServerMessage& msg) override;
  Received receive() override;
  std::uint64_t messages_delivered() const override;

  std::vector<std::uint16_t> ports() const;
  std::string state_hash() const;
  // Stops every server thread and hands back the final states.
  std::vector<ServerState> release() &&;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace odes
