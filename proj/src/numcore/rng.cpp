#include <cmath>
#include <numbers>

#include "hamworld/numcore.hpp"

namespace hamworld {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc908ULL)), counter_(0) {}

Rng Rng::split(std::string_view label) const {
  return Rng(mix64(key_ ^ mix64(fnv1a64(label))), 0);
}

Rng Rng::split(std::uint64_t index) const {
  return Rng(mix64(key_ ^ mix64(index + 0x243f6a8885a308d3ULL)), 0);
}

std::uint64_t Rng::next_u64() {
  // Two rounds over (key, counter) keep adjacent counters decorrelated.
  const std::uint64_t c = counter_++;
  return mix64(mix64(c ^ key_) + key_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller, one draw per pair of uniforms so the stream position stays
  // a simple function of the number of calls.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  // Lemire-style rejection-free multiply is fine for n << 2^64.
  const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(prod >> 64);
}

}  // namespace hamworld
