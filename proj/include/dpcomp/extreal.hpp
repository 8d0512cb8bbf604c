#pragma once

#include <cmath>
#include <limits>

namespace dpcomp {

// Distances live in [0, inf]. +inf is a first-class value: it absorbs
// addition, max and min behave as usual, and the only defined product with
// zero is the scaling convention 0 * inf = 0 (a zero budget yields the zero
// metric). Plain doubles already implement everything except that product.

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_inf(double x) { return std::isinf(x); }

// eps * x with the 0 * inf = 0 convention. Requires eps >= 0, x >= 0.
inline double xscale(double eps, double x) {
    if (eps == 0.0) return 0.0;
    return eps * x;
}

// a + b; IEEE already absorbs inf. Kept as a named helper so intent reads.
inline double xadd(double a, double b) { return a + b; }

}  // namespace dpcomp
