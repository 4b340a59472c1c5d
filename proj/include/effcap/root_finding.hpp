#pragma once

#include <cmath>
#include <cstddef>

namespace effcap {

struct Bracket {
    double lo;
    double hi;

    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
};

// Bisection for a non-decreasing f with f(lo) <= 0 <= f(hi). Stops when the
// bracket is narrower than abs_tol or after max_iter halvings; the caller is
// responsible for checking the sign condition beforehand.
template <class F>
Bracket bisect_increasing(F&& f, double lo, double hi, double abs_tol, int max_iter = 200) {
    for (int i = 0; i < max_iter && hi - lo > abs_tol; ++i) {
        const double m = 0.5 * (lo + hi);
        if (m <= lo || m >= hi) break;  // bracket is at floating-point resolution
        if (f(m) <= 0.0) {
            lo = m;
        } else {
            hi = m;
        }
    }
    return {lo, hi};
}

// Same, for a non-increasing f with f(lo) >= 0 >= f(hi).
template <class F>
Bracket bisect_decreasing(F&& f, double lo, double hi, double abs_tol, int max_iter = 200) {
    return bisect_increasing([&](double x) { return -f(x); }, lo, hi, abs_tol, max_iter);
}

}  // namespace effcap
