#include "leanet/prng.hpp"

#include <cmath>

namespace leanet {

double Rng::next_gaussian() {
  double u1 = 0.0;
  do {
    u1 = next_unit();
  } while (u1 <= 0.0);
  double u2 = next_unit();
  constexpr double kTau = 6.283185307179586476925287;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTau * u2);
}

uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
  // FNV-1a over the tag, then two SplitMix64 scrambles to decorrelate streams.
  uint64_t h = 0xCBF29CE484222325ull;
  for (char c : tag) {
    h ^= uint8_t(c);
    h *= 0x100000001B3ull;
  }
  Rng a(base ^ h);
  uint64_t mixed = a.next_u64();
  Rng b(mixed ^ (index * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull));
  b.next_u64();
  return b.next_u64();
}

}  // namespace leanet
