#pragma once

#include "bvctl/boundary.hpp"
#include "bvctl/model.hpp"

#include <cmath>

namespace bvctl::fixtures {

inline const ModelParams& default_params() {
    static const ModelParams p(-1.0, 1.0, 1.0, 0.5, 1.0, 1.0);
    return p;
}

inline const CostSpec& default_cost() {
    static const CostSpec c = CostSpec::quadratic(0.0);
    return c;
}

// 401 nodes on [-20, 20]; takes a few seconds, so solved once per process
inline const BoundaryPair& default_boundaries() {
    static const BoundaryPair c =
        solve_boundaries(default_params(), default_cost(), uniform_grid(-20.0, 20.0, 401));
    return c;
}

inline const PolicyBoundaries& default_policy() {
    static const PolicyBoundaries p = to_policy(default_boundaries(), default_params(), default_log_phigrid());
    return p;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace bvctl::fixtures
