#pragma once

#include <cstdint>
#include <deque>
#include <random>

#include "odes/int128.hpp"

namespace odes {

// Source of the masks and permutations used by share(). Implementations are
// not thread-safe; give each thread its own instance.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual std::uint64_t next_u64() = 0;

  // Uniform over the closed interval [lo, hi]; rejection sampling, no bias.
  virtual i128 uniform(i128 lo, i128 hi);
  // Uniform over [0, n).
  virtual std::size_t below(std::size_t n);

 protected:
  i128 draw_uniform(i128 lo, i128 hi);
};

class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() override { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

class EntropyRandom final : public RandomSource {
 public:
  std::uint64_t next_u64() override;

 private:
  std::random_device device_;
};

// Replays fixed mask values and permutation picks, then falls back to a
// seeded generator. Used to reproduce hand-worked examples exactly.
class ScriptedRandom final : public RandomSource {
 public:
  explicit ScriptedRandom(std::uint64_t fallback_seed = 0) : fallback_(fallback_seed) {}

  void push_uniform(i128 v) { uniforms_.push_back(v); }
  void push_index(std::size_t v) { indices_.push_back(v); }

  std::uint64_t next_u64() override { return fallback_.next_u64(); }
  i128 uniform(i128 lo, i128 hi) override;
  std::size_t below(std::size_t n) override;

 private:
  std::deque<i128> uniforms_;
  std::deque<std::size_t> indices_;
  SeededRandom fallback_;
};

}  // namespace odes
