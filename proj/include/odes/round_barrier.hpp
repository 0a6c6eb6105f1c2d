#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "odes/sharing.hpp"

namespace odes {

// Completeness barrier for delta rounds: collects deltas per round id and
// releases a round only once one delta from each of the expected servers
// is present. Deltas for later rounds are buffered, so arrival order
// across rounds does not matter. Thread-safe.
class RoundBarrier {
 public:
  explicit RoundBarrier(std::size_t expected) : expected_(expected) {}
  // Moves are for relocating an idle owner; waiters must not be blocked.
  RoundBarrier(RoundBarrier&& other) noexcept;
  RoundBarrier& operator=(RoundBarrier&& other) noexcept;

  // False if this server already contributed to the round or the round was
  // already released.
  bool offer(const Delta& delta);
  bool complete(std::uint64_t round) const;
  std::optional<std::vector<Delta>> try_take(std::uint64_t round);
  // Blocks until the round is complete; ProtocolTimeout after `timeout`.
  std::vector<Delta> await_round(std::uint64_t round, std::chrono::milliseconds timeout);
  // Drops buffered deltas for every round <= `round`.
  void discard_through(std::uint64_t round);

  std::size_t expected() const { return expected_; }
  std::size_t buffered_rounds() const;

 private:
  bool complete_locked(std::uint64_t round) const;
  std::vector<Delta> take_locked(std::uint64_t round);

  std::size_t expected_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, std::vector<Delta>> rounds_;
  std::uint64_t released_through_ = 0;
  bool any_released_ = false;
};

}  // namespace odes
