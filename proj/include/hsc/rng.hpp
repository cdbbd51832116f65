#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace hsc {

// Counter-based generator: output i is the SplitMix64 finaliser applied to
// key + (i + 1) * golden. Streams with different keys are independent, and
// any draw is a pure function of (key, counter).
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit KeyedRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t tag_hash(std::string_view tag);

// Key for one component stream of one replication cell. kappa and rho_u enter
// as round(1000 * value).
std::uint64_t stream_key(std::uint64_t seed, double kappa, double rho_u, std::uint64_t rep,
                         std::string_view tag);

inline KeyedRng make_stream(std::uint64_t seed, double kappa, double rho_u, std::uint64_t rep,
                            std::string_view tag) {
  return KeyedRng(stream_key(seed, kappa, rho_u, rep, tag));
}

}  // namespace hsc
