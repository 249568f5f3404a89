#pragma once

#include <vector>

namespace refscale::detail {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre rule with n points, cached per n.
const GaussRule& gauss_legendre(int n);

}  // namespace refscale::detail
