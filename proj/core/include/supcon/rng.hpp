#pragma once

#include <cstdint>
#include <span>

namespace supcon {

// Counter-based deterministic generator. Every random draw in the project
// flows through this type so that a (seed, stream tags, call sequence)
// triple fully determines every number, in any implementation language.
//
// Definition (all arithmetic on uint64, wrapping):
//
//   mix(x): x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
//           x ^= x >> 27;  x *= 0x94D049BB133111EB
//           x ^= x >> 31;  return x              (SplitMix64 finalizer)
//
//   the stream with key K produces   out_n = mix(K + n * 0x9E3779B97F4A7C15)
//   for n = 1, 2, 3, ...
//
//   child stream:  derive(K, tag) = mix(K + 0x9E3779B97F4A7C15) ^ mix(tag ^ 0x6A09E667F3BCC909)
//
//   uniform01 = (out >> 11) * 2^-53                               in [0, 1)
//   uniform(a, b) = a + (b - a) * uniform01
//   normal(): draw u1, u2; return sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
//             (exactly two draws per call, nothing cached)
//   uniform_index(n) = min(floor(uniform01 * n), n - 1)
//
// Training streams are split per role and then per (epoch, batch):
// rng(seed).child(role).child(epoch).child(batch). Role tags are in
// supcon::stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  // Independent stream; the child's counter starts at zero.
  Rng child(std::uint64_t tag) const;

  std::uint64_t next_u64();
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sigma);
  // Uniform over {0, ..., n-1}; n must be positive.
  std::size_t uniform_index(std::size_t n);

  void fill_normal(std::span<double> out, double sigma);
  void fill_uniform(std::span<double> out, double lo, double hi);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace stream {
// Role tags for child streams.
inline constexpr std::uint64_t kDatasetCenters = 1;
inline constexpr std::uint64_t kDatasetNoise = 2;
inline constexpr std::uint64_t kBatchOrder = 3;
inline constexpr std::uint64_t kAugment = 4;
inline constexpr std::uint64_t kCapping = 5;
inline constexpr std::uint64_t kModelInit = 6;
inline constexpr std::uint64_t kHeadInit = 7;
inline constexpr std::uint64_t kCorrupt = 8;
}  // namespace stream

}  // namespace supcon
