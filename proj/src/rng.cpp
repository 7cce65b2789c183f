#include "leomoe/rng.hpp"

#include <limits>
#include <stdexcept>

namespace leomoe {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed)
    : key_(seed), engine_(splitmix64(seed)) {}

RandomStream RandomStream::derive(std::string_view name) const {
  return RandomStream(splitmix64(key_ ^ splitmix64(fnv1a(name))));
}

RandomStream RandomStream::derive(std::uint64_t index) const {
  return RandomStream(splitmix64(splitmix64(key_) + index * 0xD1B54A32D192ED03ULL));
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

}  // namespace leomoe
