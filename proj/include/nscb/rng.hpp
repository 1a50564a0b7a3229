#pragma once

#include <cstdint>
#include <span>

namespace nscb {

// splitmix64. Counter-based: each draw adds a fixed odd increment to the state
// and hashes it, so a stream is a pure function of (initial state, draw count).
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Key-mixing for deriving independent substream seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t root, std::uint64_t key) {
  SplitMix64 g{root ^ (0x9e3779b97f4a7c15ULL * (key + 0x632be59bd9b4e019ULL))};
  g.next();
  return g.next();
}

// Fixed stream ids. Each consumer owns a stream, so adding draws to one
// consumer never shifts another's sequence.
enum StreamId : std::uint64_t {
  kReplayCoinStream = 1,
  kReplayIndexStream = 2,
  kActionStream = 3,
  kEnvStream = 4,
};

// Inverse-CDF draw from an explicit probability vector. Entries <= 0 are
// skipped; if rounding leaves the cumulative sum epsilon short of 1, the last
// positive entry absorbs the tail.
inline int categorical_draw(SplitMix64& g, std::span<const double> probs) {
  double u = g.uniform01();
  double acc = 0.0;
  int last = 0;
  for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
    if (probs[k] <= 0.0) continue;
    last = k;
    acc += probs[k];
    if (u < acc) return k;
  }
  return last;
}

class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::uint64_t stream_id)
      : gen_{mix_seed(root_seed, stream_id)} {}

  double uniform01() { return gen_.uniform01(); }
  bool bernoulli(double p) { return gen_.uniform01() < p; }
  int categorical(std::span<const double> probs) { return categorical_draw(gen_, probs); }

 private:
  SplitMix64 gen_;
};

}  // namespace nscb
