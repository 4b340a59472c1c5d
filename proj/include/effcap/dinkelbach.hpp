#pragma once

// Dinkelbach's method for  max_{p in [lo, hi]} f(p) / (p + offset)  with f
// concave. Each round solves the parametric problem max f(p) - lambda (p +
// offset) through the stationarity condition f'(p) = lambda and updates
// lambda to the ratio at the new point.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "effcap/error.hpp"
#include "effcap/optimizers.hpp"

namespace effcap {

struct ValueSlope {
    double value = 0;
    double slope = 0;
};

struct DinkelbachResult {
    double p_star = 0;
    double ratio = 0;
    int iterations = 0;
    std::vector<double> lambdas;  // multiplier after each round
};

// `f(p)` returns {f(p), f'(p)}. Ties in the parametric problem resolve to the
// smallest feasible p.
template <class F>
DinkelbachResult dinkelbach_max_ratio(const F& f, double p_lo, double p_hi, double offset = 0.0,
                                      int max_iter = 100) {
    require(p_lo > 0 || offset > 0, "eee.p_min", "p + offset must stay positive");
    require(p_hi >= p_lo, "eee.p_max", "must be >= p_min");
    require(offset >= 0, "eee.circuit_power", "must be >= 0");

    auto argmax_parametric = [&](double lambda) {
        const double tie = 1e-12 * std::max(1.0, std::abs(lambda));
        if (f(p_lo).slope - lambda <= tie) return p_lo;
        if (f(p_hi).slope - lambda >= 0) return p_hi;
        double lo = p_lo;
        double hi = p_hi;
        for (int i = 0; i < 200 && hi - lo > 1e-15 * p_hi; ++i) {
            const double m = 0.5 * (lo + hi);
            if (f(m).slope > lambda) {
                lo = m;
            } else {
                hi = m;
            }
        }
        return 0.5 * (lo + hi);
    };

    DinkelbachResult out;
    double p = p_lo;
    double lambda = f(p).value / (p + offset);
    out.lambdas.push_back(lambda);
    for (int it = 1; it <= max_iter; ++it) {
        p = argmax_parametric(lambda);
        const double value = f(p).value;
        const double gap = value - lambda * (p + offset);
        const double next = value / (p + offset);
        out.iterations = it;
        if (next < lambda - 1e-12 * std::max(1.0, std::abs(lambda))) {
            throw InfeasibleError("Dinkelbach multiplier decreased; objective is not concave");
        }
        lambda = std::max(lambda, next);
        out.lambdas.push_back(lambda);
        if (std::abs(gap) <= 1e-9 * std::abs(value)) {
            out.p_star = p;
            out.ratio = value / (p + offset);
            return out;
        }
    }
    throw ConvergenceError("Dinkelbach iteration did not converge in " +
                               std::to_string(max_iter) + " rounds",
                           lambda);
}

// Effective energy efficiency C(theta, R(p)) / (p + circuit_power) of one
// receiver link; bandwidth, gain and noise are taken from `link`.
inline DinkelbachResult dinkelbach_eee(const SharedMac& mac, const ReceiverLink& link, double p_min,
                                       double p_max, double circuit_power = 0.0) {
    link.validate();
    require(link.bandwidth_b > 0, "optimize.bandwidth_b", "must be > 0");
    auto f = [&](double p) {
        const double r = shannon_rate(link.bandwidth_b, p, link.gain_h, link.noise_n0);
        const double slope = rate_power_slope(link.bandwidth_b, p, link.gain_h, link.noise_n0);
        ValueSlope v;
        if (r <= 0) {
            v.slope = effcap_rate_derivative(
                          mac, link.theta_k,
                          1e-9 * shannon_rate(link.bandwidth_b, p_max, link.gain_h, link.noise_n0)) *
                      slope;
            return v;
        }
        v.value = effcap_at_rate(mac, link.theta_k, r);
        v.slope = effcap_rate_derivative(mac, link.theta_k, r) * slope;
        return v;
    };
    return dinkelbach_max_ratio(f, p_min, p_max, circuit_power);
}

}  // namespace effcap
