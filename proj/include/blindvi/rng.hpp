#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace blindvi {

/// Counter-based SplitMix64 generator with Box-Muller normals.
///
/// The stream is a pure function of (seed, counter), so two instances built
/// from the same seed produce bit-identical sequences on every platform.
/// Instances are single-owner; use `derive` to hand independent streams to
/// parallel workers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  /// Child seed mixing `seed` with an ordered list of stream tags.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;
  static std::uint64_t derive(std::uint64_t seed, std::span<const std::uint64_t> tags) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) noexcept;
  /// Standard normal.
  double normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace blindvi
