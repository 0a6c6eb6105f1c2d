#include "odes/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

#include "odes/error.hpp"

namespace odes {

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) fail(ErrorCode::ConnectionLost, std::string("send: ") + std::strerror(errno));
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0) fail(ErrorCode::ConnectionLost, "peer closed the connection");
    if (n < 0) fail(ErrorCode::ConnectionLost, std::string("recv: ") + std::strerror(errno));
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void send_hello(int fd, NodeId self) {
  ByteWriter w;
  w.raw(kHandshakeMagic);
  w.u16(self);
  write_all(fd, w.data().data(), w.data().size());
}

NodeId read_hello(int fd) {
  std::uint8_t buf[10];
  read_all(fd, buf, sizeof buf);
  ByteReader r(buf);
  if (!r.expect(kHandshakeMagic)) fail(ErrorCode::TransportError, "handshake: bad magic");
  return *r.u16();
}

int make_listener(std::uint16_t& port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail(ErrorCode::TransportError, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 64) != 0) {
    ::close(fd);
    fail(ErrorCode::TransportError, std::string("bind/listen: ") + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port = ntohs(addr.sin_port);
  return fd;
}

int connect_to(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail(ErrorCode::TransportError, std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    fail(ErrorCode::TransportError, std::string("connect: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

int accept_from(int listen_fd) {
  const int fd = ::accept(listen_fd, nullptr, nullptr);
  if (fd < 0) fail(ErrorCode::TransportError, std::string("accept: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

struct Inbound {
  NodeId sender = 0;
  std::optional<ServerMessage> msg;  // empty: connection lost
};

class Inbox {
 public:
  void push(Inbound item) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(item));
    }
    cv_.notify_one();
  }

  std::optional<Inbound> pop_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; })) return std::nullopt;
    if (items_.empty()) return std::nullopt;
    Inbound item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Inbound> items_;
  bool closed_ = false;
};

struct Connection {
  int fd = -1;
  NodeId peer = 0;
  std::mutex write_mu;
  std::thread reader;

  void write(const std::vector<std::uint8_t>& payload) {
    std::lock_guard lock(write_mu);
    write_frame(fd, payload);
  }
};

}  // namespace

void write_frame(int fd, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxFrameBytes) fail(ErrorCode::TransportError, "frame too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  write_all(fd, w.data().data(), w.data().size());
}

std::vector<std::uint8_t> read_frame(int fd) {
  std::uint8_t header[4];
  read_all(fd, header, sizeof header);
  ByteReader r(header);
  const std::uint32_t len = *r.u32();
  if (len > kMaxFrameBytes) fail(ErrorCode::TransportError, "frame length " + std::to_string(len) + " too large");
  std::vector<std::uint8_t> payload(len);
  read_all(fd, payload.data(), len);
  return payload;
}

NodeId handshake_connect(int fd, NodeId self) {
  send_hello(fd, self);
  return read_hello(fd);
}

NodeId handshake_accept(int fd, NodeId self) {
  const NodeId peer = read_hello(fd);
  send_hello(fd, self);
  return peer;
}

struct TcpCluster::Impl {
  struct Server {
    NodeId id = 0;
    int listen_fd = -1;
    std::uint16_t port = 0;
    mutable std::mutex state_mu;
    std::unique_ptr<ServerNode> node;
    std::map<NodeId, std::shared_ptr<Connection>> peers;
    Inbox inbox;
    std::thread loop;
  };

  TcpOptions options;
  std::vector<std::unique_ptr<Server>> servers;
  std::map<NodeId, std::shared_ptr<Connection>> client_links;
  Inbox client_inbox;
  std::atomic<bool> stopping{false};
  std::atomic<std::uint64_t> frames{0};
  bool stopped = false;

  void start_reader(const std::shared_ptr<Connection>& conn, Inbox& inbox) {
    conn->reader = std::thread([this, conn, &inbox] {
      while (true) {
        try {
          auto payload = read_frame(conn->fd);
          inbox.push(Inbound{conn->peer, decode(payload)});
        } catch (const Error&) {
          if (!stopping) inbox.push(Inbound{conn->peer, std::nullopt});
          return;
        }
      }
    });
  }

  void route(Server& self, std::vector<Outgoing> outgoing) {
    for (Outgoing& out : outgoing) {
      const auto payload = encode(out.msg);
      const auto deliver = [&](NodeId to) {
        if (to == self.id) {
          self.inbox.push(Inbound{self.id, std::move(out.msg)});
          return;
        }
        try {
          self.peers.at(to)->write(payload);
          ++frames;
        } catch (const Error&) {
          // A dead peer surfaces to the client as a timeout.
        }
      };
      if (out.to == kBroadcast) {
        for (std::size_t j = 0; j < servers.size(); ++j)
          if (j != self.id) deliver(static_cast<NodeId>(j));
        deliver(self.id);
      } else {
        deliver(out.to);
      }
    }
  }

  void run_server(Server& self) {
    using clock = std::chrono::steady_clock;
    std::optional<clock::time_point> deadline;
    std::uint64_t round_seen = 0;
    while (!stopping) {
      auto wait = std::chrono::milliseconds(50);
      if (deadline) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - clock::now());
        wait = std::max(std::chrono::milliseconds(0), std::min(wait, left));
      }
      auto item = self.inbox.pop_for(wait);
      if (stopping) break;
      std::vector<Outgoing> out;
      {
        std::lock_guard lock(self.state_mu);
        if (item && item->msg) {
          out = self.node->handle(item->sender, *item->msg);
        } else if (deadline && clock::now() >= *deadline && self.node->awaiting_round()) {
          out = self.node->abort_pending();
        }
        if (!self.node->awaiting_round()) {
          deadline.reset();
        } else if (!deadline || self.node->current_round() != round_seen) {
          deadline = clock::now() + options.round_timeout;
        }
        round_seen = self.node->current_round();
      }
      route(self, std::move(out));
    }
  }

  void shutdown_all() {
    if (stopped) return;
    stopped = true;
    stopping = true;
    for (auto& s : servers) s->inbox.close();
    client_inbox.close();
    const auto close_conn = [](const std::shared_ptr<Connection>& c) {
      if (c->fd >= 0) ::shutdown(c->fd, SHUT_RDWR);
    };
    for (auto& s : servers)
      for (auto& [_, c] : s->peers) close_conn(c);
    for (auto& [_, c] : client_links) close_conn(c);
    for (auto& s : servers)
      if (s->loop.joinable()) s->loop.join();
    const auto join_conn = [](const std::shared_ptr<Connection>& c) {
      if (c->reader.joinable()) c->reader.join();
      if (c->fd >= 0) ::close(c->fd);
      c->fd = -1;
    };
    for (auto& s : servers) {
      for (auto& [_, c] : s->peers) join_conn(c);
      if (s->listen_fd >= 0) ::close(s->listen_fd);
      s->listen_fd = -1;
    }
    for (auto& [_, c] : client_links) join_conn(c);
  }
};

namespace {

std::vector<ServerState> fresh_states(const MaskParams& params) {
  std::vector<ServerState> states;
  for (unsigned j = 0; j < params.share_count(); ++j) states.emplace_back(static_cast<NodeId>(j), params);
  return states;
}

}  // namespace

TcpCluster::TcpCluster(const MaskParams& params, TcpOptions options)
    : TcpCluster(fresh_states(params), options) {}

TcpCluster::TcpCluster(std::vector<ServerState> states, TcpOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = options;
  if (states.empty()) fail(ErrorCode::ConfigError, "cluster needs at least one server");
  if (states.size() != states.front().params.share_count())
    fail(ErrorCode::ConfigError, "server state count does not match share count");
  try {
    for (std::size_t j = 0; j < states.size(); ++j) {
      if (states[j].server_id != j) fail(ErrorCode::ConfigError, "server states out of order");
      auto s = std::make_unique<Impl::Server>();
      s->id = static_cast<NodeId>(j);
      s->node = std::make_unique<ServerNode>(std::move(states[j]));
      s->listen_fd = make_listener(s->port);
      impl_->servers.push_back(std::move(s));
    }
    const auto link = [](int fd, NodeId peer) {
      auto c = std::make_shared<Connection>();
      c->fd = fd;
      c->peer = peer;
      return c;
    };
    // Server j dials every lower-numbered server.
    for (std::size_t j = 0; j < impl_->servers.size(); ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        auto& dialer = *impl_->servers[j];
        auto& acceptor = *impl_->servers[i];
        const int out_fd = connect_to(acceptor.port);
        const int in_fd = accept_from(acceptor.listen_fd);
        send_hello(out_fd, dialer.id);
        const NodeId seen_dialer = handshake_accept(in_fd, acceptor.id);
        const NodeId seen_acceptor = read_hello(out_fd);
        if (seen_dialer != dialer.id || seen_acceptor != acceptor.id)
          fail(ErrorCode::TransportError, "handshake returned unexpected node ids");
        dialer.peers[acceptor.id] = link(out_fd, acceptor.id);
        acceptor.peers[dialer.id] = link(in_fd, dialer.id);
      }
    }
    for (auto& s : impl_->servers) {
      const int out_fd = connect_to(s->port);
      const int in_fd = accept_from(s->listen_fd);
      send_hello(out_fd, kClientNode);
      const NodeId seen_client = handshake_accept(in_fd, s->id);
      const NodeId seen_server = read_hello(out_fd);
      if (seen_client != kClientNode || seen_server != s->id)
        fail(ErrorCode::TransportError, "client handshake returned unexpected node ids");
      impl_->client_links[s->id] = link(out_fd, s->id);
      s->peers[kClientNode] = link(in_fd, kClientNode);
    }
    for (auto& s : impl_->servers)
      for (auto& [_, c] : s->peers) impl_->start_reader(c, s->inbox);
    for (auto& [_, c] : impl_->client_links) impl_->start_reader(c, impl_->client_inbox);
    for (auto& s : impl_->servers) {
      Impl::Server* raw = s.get();
      s->loop = std::thread([this, raw] { impl_->run_server(*raw); });
    }
  } catch (...) {
    impl_->shutdown_all();
    throw;
  }
}

TcpCluster::~TcpCluster() {
  if (impl_) impl_->shutdown_all();
}

std::size_t TcpCluster::server_count() const { return impl_->servers.size(); }

void TcpCluster::send(NodeId server, const ServerMessage& msg) {
  auto it = impl_->client_links.find(server);
  if (it == impl_->client_links.end()) fail(ErrorCode::UnknownRecipient, "server " + std::to_string(server));
  it->second->write(encode(msg));
  ++impl_->frames;
}

Received TcpCluster::receive() {
  auto item = impl_->client_inbox.pop_for(impl_->options.client_timeout);
  if (!item) fail(ErrorCode::ProtocolTimeout, "no reply within " + std::to_string(impl_->options.client_timeout.count()) + " ms");
  if (!item->msg) fail(ErrorCode::ConnectionLost, "connection to server " + std::to_string(item->sender) + " lost");
  return Received{item->sender, std::move(*item->msg)};
}

std::uint64_t TcpCluster::messages_delivered() const { return impl_->frames.load(); }

std::vector<std::uint16_t> TcpCluster::ports() const {
  std::vector<std::uint16_t> out;
  for (const auto& s : impl_->servers) out.push_back(s->port);
  return out;
}

std::string TcpCluster::state_hash() const {
  std::string out;
  for (const auto& s : impl_->servers) {
    std::lock_guard lock(s->state_mu);
    if (!out.empty()) out.push_back(':');
    out += state_digest(s->node->state());
  }
  return out;
}

void TcpCluster::stop() { impl_->shutdown_all(); }

std::vector<ServerState> TcpCluster::release() && {
  impl_->shutdown_all();
  std::vector<ServerState> states;
  for (auto& s : impl_->servers) states.push_back(std::move(*s->node).release());
  return states;
}

}  // namespace odes
