#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ddc {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// stream identifiers, e.g. derive_seed(master, {kPanelStream, agent}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream namespaces, so panel, path, and model draws never share a stream.
inline constexpr std::uint64_t kPanelStream = 0x70616e656cULL;
inline constexpr std::uint64_t kPathStream = 0x7061746873ULL;
inline constexpr std::uint64_t kModelStream = 0x6d6f64656cULL;
inline constexpr std::uint64_t kReplicationStream = 0x7265706cULL;

/// One independent random stream. The engine's output sequence is fixed by
/// the standard, and the conversions below avoid implementation-defined
/// distributions, so draws are bit-reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejecting the top partial block keeps the draw exactly uniform.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
  }

  /// Index drawn from a probability row of length n (rows may carry
  /// round-off; the last positive entry absorbs any remainder).
  std::size_t categorical(const double* probs, std::size_t n) {
    const double u = uniform();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = i;
      cum += probs[i];
      if (u < cum) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ddc
