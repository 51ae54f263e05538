#pragma once

#include <vector>

namespace rotgyro {

/// Gauss rule: nodes and weights for a fixed weight function.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

/// Gauss-Laguerre rule for the weight exp(-t) on [0, inf). Exact for
/// polynomials of degree <= 2*order - 1.
QuadratureRule gauss_laguerre(int order);

}  // namespace rotgyro
