#include "supcon/rng.hpp"

#include <cassert>
#include <cmath>

namespace supcon {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kChildSalt = 0x6A09E667F3BCC909ULL;

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Rng Rng::child(std::uint64_t tag) const {
  return Rng(mix(key_ + kGolden) ^ mix(tag ^ kChildSalt));
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(kTwoPi * u2);
}

double Rng::normal(double mean, double sigma) {
  return mean + sigma * normal();
}

std::size_t Rng::uniform_index(std::size_t n) {
  assert(n > 0);
  const auto idx = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  return idx < n ? idx : n - 1;
}

void Rng::fill_normal(std::span<double> out, double sigma) {
  for (double& v : out) v = sigma * normal();
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
  for (double& v : out) v = uniform(lo, hi);
}

}  // namespace supcon
