#include "odes/transport.hpp"

#include <algorithm>
#include <string>

#include "odes/error.hpp"

namespace odes {

RoundBarrier::RoundBarrier(RoundBarrier&& other) noexcept : expected_(other.expected_) {
  std::lock_guard lock(other.mu_);
  rounds_ = std::move(other.rounds_);
  released_through_ = other.released_through_;
  any_released_ = other.any_released_;
}

RoundBarrier& RoundBarrier::operator=(RoundBarrier&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  expected_ = other.expected_;
  rounds_ = std::move(other.rounds_);
  released_through_ = other.released_through_;
  any_released_ = other.any_released_;
  return *this;
}

bool RoundBarrier::offer(const Delta& delta) {
  std::lock_guard lock(mu_);
  if (any_released_ && delta.round <= released_through_) return false;
  auto& bucket = rounds_[delta.round];
  if (std::any_of(bucket.begin(), bucket.end(),
                  [&](const Delta& d) { return d.server_id == delta.server_id; }))
    return false;
  bucket.push_back(delta);
  if (bucket.size() >= expected_) cv_.notify_all();
  return true;
}

bool RoundBarrier::complete_locked(std::uint64_t round) const {
  auto it = rounds_.find(round);
  return it != rounds_.end() && it->second.size() >= expected_;
}

bool RoundBarrier::complete(std::uint64_t round) const {
  std::lock_guard lock(mu_);
  return complete_locked(round);
}

std::vector<Delta> RoundBarrier::take_locked(std::uint64_t round) {
  auto node = rounds_.extract(round);
  std::vector<Delta> out = std::move(node.mapped());
  std::sort(out.begin(), out.end(), [](const Delta& a, const Delta& b) { return a.server_id < b.server_id; });
  released_through_ = std::max(released_through_, round);
  any_released_ = true;
  return out;
}

std::optional<std::vector<Delta>> RoundBarrier::try_take(std::uint64_t round) {
  std::lock_guard lock(mu_);
  if (!complete_locked(round)) return std::nullopt;
  return take_locked(round);
}

std::vector<Delta> RoundBarrier::await_round(std::uint64_t round, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return complete_locked(round); })) {
    const auto it = rounds_.find(round);
    const std::size_t have = it == rounds_.end() ? 0 : it->second.size();
    fail(ErrorCode::ProtocolTimeout, "round " + std::to_string(round) + " has " + std::to_string(have) +
                                         " of " + std::to_string(expected_) + " deltas");
  }
  return take_locked(round);
}

void RoundBarrier::discard_through(std::uint64_t round) {
  std::lock_guard lock(mu_);
  rounds_.erase(rounds_.begin(), rounds_.upper_bound(round));
  released_through_ = std::max(released_through_, round);
  any_released_ = true;
}

std::size_t RoundBarrier::buffered_rounds() const {
  std::lock_guard lock(mu_);
  return rounds_.size();
}

}  // namespace odes

namespace odes {

void ClientTransport::broadcast(const ServerMessage& msg) {
  for (std::size_t j = 0; j < server_count(); ++j) send(static_cast<NodeId>(j), msg);
}

}  // namespace odes
