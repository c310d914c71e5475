#pragma once

#include <vector>

#include "janus/tensor.hpp"

namespace janus {

/// Clamped uniform B-spline basis on [0,1]: `count` quadratic basis
/// functions over an open knot vector with count+degree+1 knots.
struct BSplineBasis {
    int count = 8;
    int degree = 2;
    std::vector<double> knots;

    static BSplineBasis uniform(int count, int degree = 2);
};

constexpr double kDomainEps = 1e-9;

/// Evaluates all basis values and first derivatives at x (clamped into
/// [kDomainEps, 1-kDomainEps] first). At most degree+1 entries of each
/// output are nonzero; values sum to 1 by partition of unity.
void bspline_eval(const BSplineBasis& basis, double x, double* values, double* derivatives);

}  // namespace janus
