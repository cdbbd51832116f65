#include "hsc/rng.hpp"

#include <cmath>

namespace hsc {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

KeyedRng::result_type KeyedRng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

std::uint64_t tag_hash(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t stream_key(std::uint64_t seed, double kappa, double rho_u, std::uint64_t rep,
                         std::string_view tag) {
  const auto k = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(kappa * 1000.0)));
  const auto r = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(rho_u * 1000.0)));
  std::uint64_t h = mix64(seed ^ 0x5851F42D4C957F2DULL);
  h = mix64(h ^ k);
  h = mix64(h + r * kGolden);
  h = mix64(h ^ (rep + 0x2545F4914F6CDD1DULL));
  h = mix64(h ^ tag_hash(tag));
  return h;
}

}  // namespace hsc
