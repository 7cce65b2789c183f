#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace leomoe {

/// Replayable random source identified by a 64-bit key.
///
/// Every stream can derive child streams by name or by index; a child's
/// sequence depends only on the parent key and the derivation label, never on
/// how many numbers the parent has already produced. All randomness in a run
/// flows from one root seed through named children ("topology", "survival",
/// "activation", "baselines") so that each component can be varied while the
/// others stay coupled.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  RandomStream derive(std::string_view name) const;
  RandomStream derive(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace leomoe
