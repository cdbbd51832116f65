#include "hsc/basis_cache.hpp"

#include <map>
#include <mutex>
#include <utility>

namespace hsc {

BasisPtr cached_basis(Eigen::Index n, int q) {
  static std::mutex mu;
  static std::map<std::pair<Eigen::Index, int>, BasisPtr> cache;
  const auto key = std::make_pair(n, q);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto basis = std::make_shared<const Basis>(spectral_basis<double>(n, q));
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(key, std::move(basis));
  return it->second;
}

}  // namespace hsc
