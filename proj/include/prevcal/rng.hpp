#ifndef PREVCAL_RNG_HPP
#define PREVCAL_RNG_HPP

#include <cstdint>

namespace prevcal {

// PCG32 with stream selection (O'Neill 2014). Every (seed, stream_id) pair
// fixes the draw sequence exactly; distinct stream ids select distinct odd
// increments and therefore statistically independent sequences, which is what
// lets each MCMC chain own a stream with no coordination.
//
// A stream must never be shared between threads; it is cheap to copy but the
// intended use is one stream confined to one chain.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    inc_ = (stream_id << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += mix64(seed);
    next_u32();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on the open interval (0, 1); never returns an endpoint, so logs
  // and inversions downstream are always finite.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

 private:
  // splitmix64 finalizer; decorrelates nearby user seeds before pcg init.
  static std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t inc_;
};

// Deterministic 64-bit sub-seed for replicate / task fan-out.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (task + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace prevcal

#endif
