#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace budgetlab {

// Tags separating independent noise families. Values are part of the key hash,
// so renumbering changes every simulated realization.
enum class Purpose : std::uint32_t {
  kExecution = 1,
  kObservation = 2,
  kDriftAmplitude = 3,
  kDriftRate = 4,
  kDriftTracking = 5,
  kBudgetScale = 6,
  kHistExecution = 11,
  kHistObservation = 12,
  kHistDriftAmplitude = 13,
  kHistDriftRate = 14,
  kHistDriftTracking = 15,
  kPfInit = 21,
  kPfProcess = 22,
  kPfResample = 23,
  kPfJitter = 24,
};

struct NoiseKey {
  std::int64_t week = 0;
  std::int32_t day = 0;
  Purpose purpose = Purpose::kExecution;
  std::uint32_t index = 0;  // particle or parameter slot

  auto operator<=>(const NoiseKey&) const = default;
};

// Optional audit log of consumed keys, used to prove that paired controllers
// saw identical environment draws.
class KeyRecorder {
 public:
  void record(const NoiseKey& key) { keys_.push_back(key); }
  const std::vector<NoiseKey>& keys() const { return keys_; }
  std::vector<NoiseKey> sorted_unique() const;
  void clear() { keys_.clear(); }

 private:
  std::vector<NoiseKey> keys_;
};

// Counter-based random stream: every deviate is a pure function of
// (seed, key), so draws do not depend on call order or on which controller
// asks for them.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform on the open interval (0, 1).
  double uniform(const NoiseKey& key) const;
  double normal(const NoiseKey& key) const;

  // Independent stream for a sub-component (e.g. one trial of an experiment).
  NoiseStream derive(std::uint64_t salt) const;

 private:
  std::uint64_t bits(const NoiseKey& key, std::uint64_t lane) const;

  std::uint64_t seed_;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace budgetlab
