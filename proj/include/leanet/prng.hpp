#pragma once
#include <cstdint>
#include <string_view>
#include <vector>

namespace leanet {

// ==== Deterministic randomness ==============================================
// SplitMix64: 64-bit-state generator, identical output on every platform.
// Every stochastic choice in the library flows through this type; stages get
// independent streams via derive_seed so they can rerun in isolation.
class Rng {
public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53-bit resolution.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  float uniform(float lo, float hi) { return lo + float(next_unit()) * (hi - lo); }

  // Index in [0, n); modulo bias is ~n/2^64, irrelevant at our sizes.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; always consumes exactly two draws.
  double next_gaussian();

private:
  uint64_t state_;
};

// Independent child seed for (base, tag, index); used per stage/fold/epoch.
uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0);

// Fisher-Yates with deterministic draws.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = size_t(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace leanet
