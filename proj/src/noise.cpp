#include "budgetlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace budgetlab {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<NoiseKey> KeyRecorder::sorted_unique() const {
  std::vector<NoiseKey> out = keys_;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::uint64_t NoiseStream::bits(const NoiseKey& key, std::uint64_t lane) const {
  std::uint64_t h = mix64(seed_);
  h = mix64(h ^ static_cast<std::uint64_t>(key.week));
  h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(key.day)) << 32 |
                 static_cast<std::uint64_t>(key.purpose)));
  h = mix64(h ^ key.index);
  return mix64(h ^ lane);
}

double NoiseStream::uniform(const NoiseKey& key) const {
  // 53 random mantissa bits, offset by half an ulp to stay off 0 and 1.
  return (static_cast<double>(bits(key, 0) >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal(const NoiseKey& key) const {
  const double u1 = (static_cast<double>(bits(key, 1) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(bits(key, 2) >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseStream NoiseStream::derive(std::uint64_t salt) const {
  return NoiseStream(mix64(seed_ ^ mix64(salt + 0x6a09e667f3bcc909ULL)));
}

}  // namespace budgetlab
