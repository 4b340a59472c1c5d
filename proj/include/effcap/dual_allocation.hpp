#pragma once

// Separable concave resource allocation by bisection on the budget
// multiplier:
//
//   maximize  sum_k f_k(x_k)   s.t.  sum_k x_k = budget,  x_k >= 0
//
// Each f_k is described only by its marginal value phi_k(x) = f_k'(x), which
// must be non-increasing. For a multiplier lambda, every receiver takes the x
// at which phi_k(x) = lambda (clamped to [0, budget]); lambda is then
// bisected until the budget is met.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "effcap/error.hpp"

namespace effcap {

struct DualSolution {
    std::vector<double> x;
    double multiplier = 0;
    double kkt_residual = 0;
    int iterations = 0;
};

namespace detail {

// x in [0, cap] where phi(x) crosses lambda; phi is non-increasing.
template <class Phi>
double marginal_inverse(const Phi& phi, double lambda, double cap, double phi_at_zero) {
    if (phi_at_zero <= lambda) return 0.0;
    if (phi(cap) >= lambda) return cap;
    double lo = 0.0;
    double hi = cap;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * cap; ++i) {
        const double m = 0.5 * (lo + hi);
        if (phi(m) > lambda) {
            lo = m;
        } else {
            hi = m;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// `phi(k, x)` returns receiver k's marginal value at allocation x. When
// `check_concavity` is set, each phi_k is probed on a 16-point grid over
// [0, budget] and an InfeasibleError is thrown if it ever increases.
template <class Phi>
DualSolution dual_allocate(std::size_t receivers, double budget, const Phi& phi,
                           bool check_concavity = true) {
    require(receivers >= 1, "receivers", "need at least one receiver");
    require(budget > 0 && std::isfinite(budget), "budget", "must be > 0");

    std::vector<double> phi0(receivers);
    for (std::size_t k = 0; k < receivers; ++k) {
        // marginal values may be unbounded at zero; start just inside
        phi0[k] = phi(k, 0.0);
        if (check_concavity) {
            double prev = phi0[k];
            for (int i = 1; i <= 16; ++i) {
                const double v = phi(k, budget * i / 16.0);
                if (v > prev * (1 + 1e-9) + 1e-300) {
                    throw InfeasibleError("marginal value of receiver " + std::to_string(k) +
                                          " increases along the search path; objective is not "
                                          "concave in the validated regime");
                }
                prev = v;
            }
        }
    }

    auto allocation = [&](double lambda) {
        std::vector<double> x(receivers);
        for (std::size_t k = 0; k < receivers; ++k) {
            x[k] = detail::marginal_inverse([&](double v) { return phi(k, v); }, lambda, budget,
                                            phi0[k]);
        }
        return x;
    };
    auto total = [](const std::vector<double>& x) {
        double s = 0;
        for (double v : x) s += v;
        return s;
    };

    double lam_lo = 0.0;  // everyone takes the whole budget
    double lam_hi = 1.0;
    for (std::size_t k = 0; k < receivers; ++k) {
        if (std::isfinite(phi0[k])) lam_hi = std::max(lam_hi, phi0[k]);
    }
    int it = 0;
    while (total(allocation(lam_hi)) > budget && it < 2000) {
        lam_hi *= 2;
        ++it;
    }

    DualSolution sol;
    for (; it < 400; ++it) {
        const double mid = 0.5 * (lam_lo + lam_hi);
        if (mid <= lam_lo || mid >= lam_hi) break;
        const double s = total(allocation(mid));
        if (std::abs(s - budget) <= 1e-14 * budget) {
            lam_lo = lam_hi = mid;
            break;
        }
        if (s > budget) {
            lam_lo = mid;
        } else {
            lam_hi = mid;
        }
    }
    sol.multiplier = 0.5 * (lam_lo + lam_hi);
    sol.x = allocation(sol.multiplier);
    sol.iterations = it;

    // absorb the last bit of bisection slack so the budget binds exactly
    const double s = total(sol.x);
    if (s > 0) {
        for (auto& v : sol.x) v *= budget / s;
    }

    double worst = std::abs(total(sol.x) - budget) / budget;
    const double lam = sol.multiplier;
    for (std::size_t k = 0; k < receivers; ++k) {
        const double v = phi(k, sol.x[k]);
        double r = 0;
        if (sol.x[k] <= 0.0) {
            r = std::max(0.0, v - lam);
        } else if (sol.x[k] >= budget) {
            r = std::max(0.0, lam - v);
        } else {
            r = std::abs(v - lam);
        }
        worst = std::max(worst, lam > 0 ? r / lam : r);
    }
    sol.kkt_residual = worst;
    return sol;
}

}  // namespace effcap
