#include "janus/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace janus {

BSplineBasis BSplineBasis::uniform(int count, int degree) {
    if (degree < 1 || degree > 7)
        throw ConfigError("BSplineBasis: degree " + std::to_string(degree) +
                          " outside supported range [1,7]");
    if (count < degree + 1)
        throw ConfigError("BSplineBasis: count " + std::to_string(count) +
                          " must be >= degree+1 = " + std::to_string(degree + 1));
    BSplineBasis b;
    b.count = count;
    b.degree = degree;
    const int segments = count - degree;
    b.knots.resize(static_cast<std::size_t>(count + degree + 1));
    for (int i = 0; i <= degree; ++i) b.knots[i] = 0.0;
    for (int k = 1; k < segments; ++k) b.knots[degree + k] = static_cast<double>(k) / segments;
    for (int i = count; i <= count + degree; ++i) b.knots[i] = 1.0;
    return b;
}

void bspline_eval(const BSplineBasis& basis, double x, double* values, double* derivatives) {
    const int S = basis.count, p = basis.degree;
    const int segments = S - p;
    if (!std::isfinite(x))
        throw DivergenceError("bspline_eval: non-finite coordinate");
    x = std::clamp(x, kDomainEps, 1.0 - kDomainEps);

    std::memset(values, 0, sizeof(double) * S);
    std::memset(derivatives, 0, sizeof(double) * S);

    // Knot span j: knots[j] <= x < knots[j+1], j in [p, S-1].
    const int span = p + std::min(segments - 1, static_cast<int>(x * segments));
    const double* t = basis.knots.data();

    // Triangular Cox-de Boor table; keep the degree-(p-1) row for derivatives.
    double n[8];   // current row, indices 0..d
    double nm[8];  // degree p-1 row
    double left[8], right[8];
    n[0] = 1.0;
    for (int d = 1; d <= p; ++d) {
        left[d] = x - t[span + 1 - d];
        right[d] = t[span + d] - x;
        if (d == p) std::copy(n, n + d, nm);
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double tmp = n[r] / (right[r + 1] + left[d - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        n[d] = saved;
    }

    for (int a = 0; a <= p; ++a) values[span - p + a] = n[a];

    // d/dx N_{i,p} = p * (N_{i,p-1}/(t[i+p]-t[i]) - N_{i+1,p-1}/(t[i+p+1]-t[i+1]))
    // where N_{i,p-1} is nonzero only for i in [span-p+1, span]; nm[a] holds
    // N_{span-p+1+a, p-1}.
    auto low_deg = [&](int i) -> double {
        const int a = i - (span - p + 1);
        return (a >= 0 && a <= p - 1) ? nm[a] : 0.0;
    };
    for (int a = 0; a <= p; ++a) {
        const int i = span - p + a;
        double term1 = 0.0, term2 = 0.0;
        const double d1 = t[i + p] - t[i];
        if (d1 > 0.0) term1 = low_deg(i) / d1;
        const double d2 = t[i + p + 1] - t[i + 1];
        if (d2 > 0.0) term2 = low_deg(i + 1) / d2;
        derivatives[i] = p * (term1 - term2);
    }
}

}  // namespace janus
