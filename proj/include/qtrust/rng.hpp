#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace qtrust {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream. Streams are derived from a master seed plus a
// name, so every consumer (per sample, per ensemble member, per client) owns
// an independent stream and results do not depend on execution order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

  static RngStream derive(std::uint64_t master_seed, std::string_view name) {
    return RngStream(detail::splitmix64(master_seed ^ detail::fnv1a(name)));
  }

  RngStream derive(std::string_view name) {
    // Child stream keyed by the parent's current state and a name.
    return RngStream(detail::splitmix64(gen_() ^ detail::fnv1a(name)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; no cached spare so the draw count per call is fixed.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

  int rademacher() { return (gen_() & 1u) ? 1 : -1; }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace qtrust
