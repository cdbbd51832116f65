#pragma once

#include <memory>

#include "hsc/spectral.hpp"

namespace hsc {

using Basis = SpectralBasis<double>;
using BasisPtr = std::shared_ptr<const Basis>;

// Process-wide cache of penalty eigenbases keyed by (n, q). Thread-safe.
BasisPtr cached_basis(Eigen::Index n, int q);

}  // namespace hsc
