#pragma once

// QoS-aware power and bandwidth allocation for one LAA transmitter serving
// several receivers over orthogonal subchannels. Each receiver k sees the
// Shannon rate R_k = B_k log2(1 + p_k h_k / (N0 B_k)) and, with the
// contention state held fixed, the effective capacity C(theta_k, R_k).
// C is concave and increasing in R, so both problems are separable concave
// programs solved by dual bisection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "effcap/dual_allocation.hpp"
#include "effcap/effcap.hpp"
#include "effcap/error.hpp"
#include "effcap/mac_model.hpp"

namespace effcap {

// Contention state shared by all receivers of the tagged transmitter.
struct SharedMac {
    ContentionConfig cfg;
    MacOperatingPoint op;
    double per_eps = 0;

    static SharedMac solve(const ContentionConfig& cfg, double per_eps) {
        return {cfg, solve_operating_point(cfg), per_eps};
    }
};

struct ReceiverLink {
    double gain_h = 1;
    double noise_n0 = 1e-20;  // W/Hz
    double theta_k = 1e-6;    // 1/bit
    double bandwidth_b = 1e6; // Hz
    double power_p = 0;       // W

    void validate() const {
        require(gain_h > 0 && std::isfinite(gain_h), "optimize.gain_h", "must be > 0");
        require(noise_n0 > 0 && std::isfinite(noise_n0), "optimize.noise_n0", "must be > 0");
        require(theta_k > 0 && std::isfinite(theta_k), "optimize.theta", "must be > 0");
        require(bandwidth_b >= 0 && std::isfinite(bandwidth_b), "optimize.bandwidth_b",
                "must be >= 0");
        require(power_p >= 0 && std::isfinite(power_p), "optimize.power_p", "must be >= 0");
    }
};

inline double shannon_rate(double bandwidth, double power, double gain, double n0) {
    if (bandwidth <= 0 || power <= 0) return 0.0;
    return bandwidth * std::log2(1.0 + power * gain / (n0 * bandwidth));
}

inline double shannon_rate(const ReceiverLink& l) {
    return shannon_rate(l.bandwidth_b, l.power_p, l.gain_h, l.noise_n0);
}

// dR/dp at fixed bandwidth.
inline double rate_power_slope(double bandwidth, double power, double gain, double n0) {
    return bandwidth * gain / ((n0 * bandwidth + power * gain) * std::numbers::ln2);
}

// dR/dB at fixed power; unbounded as B -> 0.
inline double rate_bandwidth_slope(double bandwidth, double power, double gain, double n0) {
    if (power <= 0) return 0.0;
    if (bandwidth <= 0) return std::numeric_limits<double>::infinity();
    const double x = power * gain / (n0 * bandwidth);
    return std::log2(1.0 + x) - x / ((1.0 + x) * std::numbers::ln2);
}

namespace detail {

// Bracketed Newton on ln LHS(C) = 0. Same root as effcap_closed_form; used
// inside optimizers where it is evaluated many thousands of times. The log
// keeps steps useful when LHS is far above 1.
inline double capacity_newton(const LinkParams& link, const ContentionConfig& cfg,
                              const MacOperatingPoint& op, double theta) {
    if (drop_probability(cfg, op) >= 1.0) return 0.0;
    const double r = link.rate_r;
    double lo = 0.0;
    double hi = r;
    double c = std::min(r, mean_throughput(link, cfg, op));
    for (int i = 0; i < 200; ++i) {
        LhsPartials f;
        bool overflow = false;
        try {
            f = closed_form_lhs_partials(link, cfg, op, theta, c);
        } catch (const DivergenceError&) {
            overflow = true;
        }
        double next = 0.5 * (lo + hi);
        if (!overflow && f.value > 0) {
            const double h = std::log(f.value);
            if (h > 0) {
                hi = c;
            } else {
                lo = c;
            }
            if (std::abs(h) <= 1e-15) return c;
            const double slope = f.d_c / f.value;
            if (slope > 0) next = c - h / slope;
        } else {
            hi = c;
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 1e-15 * r) return next;
        c = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Effective capacity of a receiver at transmit rate `rate`.
inline double effcap_at_rate(const SharedMac& mac, double theta, double rate) {
    if (rate <= 0) return 0.0;
    return detail::capacity_newton({rate, mac.per_eps}, mac.cfg, mac.op, theta);
}

// dC/dR by implicit differentiation of the capacity equation.
inline double effcap_rate_derivative(const SharedMac& mac, double theta, double rate) {
    require(rate > 0, "rate", "must be > 0");
    const LinkParams link{rate, mac.per_eps};
    if (drop_probability(mac.cfg, mac.op) >= 1.0 || mac.per_eps >= 1.0) return 0.0;
    const double c = detail::capacity_newton(link, mac.cfg, mac.op, theta);
    const auto f = closed_form_lhs_partials(link, mac.cfg, mac.op, theta, c);
    if (!(f.d_c > 0)) {
        throw InfeasibleError("capacity equation has non-positive slope in C at the root");
    }
    return -f.d_r / f.d_c;
}

struct AllocationResult {
    std::string strategy;
    std::vector<double> allocation;  // W or Hz
    std::vector<double> rate;        // R_k, bits/s
    std::vector<double> effcap;      // C_k(theta_k), bits/s
    double objective = 0;            // sum of C_k
    double kkt_residual = 0;
    int iterations = 0;
};

enum class Resource { Power, Bandwidth };

inline AllocationResult evaluate_allocation(const SharedMac& mac,
                                            const std::vector<ReceiverLink>& links,
                                            const std::vector<double>& alloc, Resource what,
                                            std::string strategy) {
    AllocationResult out;
    out.strategy = std::move(strategy);
    out.allocation = alloc;
    for (std::size_t k = 0; k < links.size(); ++k) {
        auto l = links[k];
        if (what == Resource::Power) {
            l.power_p = alloc[k];
        } else {
            l.bandwidth_b = alloc[k];
        }
        const double r = shannon_rate(l);
        const double c = effcap_at_rate(mac, l.theta_k, r);
        out.rate.push_back(r);
        out.effcap.push_back(c);
        out.objective += c;
    }
    return out;
}

namespace detail {

inline void validate_links(const std::vector<ReceiverLink>& links) {
    require(!links.empty(), "optimize.receivers", "need at least one receiver");
    for (const auto& l : links) l.validate();
}

}  // namespace detail

inline AllocationResult waterfilling_baseline(const SharedMac&, const std::vector<ReceiverLink>&,
                                              double);
inline AllocationResult channel_inversion_baseline(const SharedMac&,
                                                   const std::vector<ReceiverLink>&, double);
inline AllocationResult optimal_rate_baseline(const SharedMac&, const std::vector<ReceiverLink>&,
                                              double);
inline AllocationResult equal_bandwidth_baseline(const SharedMac&,
                                                 const std::vector<ReceiverLink>&, double);

namespace detail {

// Post-solve guard: the optimum must meet KKT tolerance and beat every
// baseline (up to evaluation noise).
inline void check_solution(const AllocationResult& opt,
                           const std::vector<AllocationResult>& baselines) {
    if (opt.kkt_residual > 1e-6) {
        throw ConvergenceError("allocation KKT residual above 1e-6", opt.kkt_residual);
    }
    for (const auto& b : baselines) {
        if (opt.objective < b.objective - 1e-9 * std::max(1.0, std::abs(b.objective))) {
            throw InfeasibleError("optimized objective " + std::to_string(opt.objective) +
                                  " is below the " + b.strategy + " baseline " +
                                  std::to_string(b.objective));
        }
    }
}

}  // namespace detail

inline AllocationResult optimize_power(const SharedMac& mac, const std::vector<ReceiverLink>& links,
                                       double p_total) {
    detail::validate_links(links);
    require(p_total > 0, "optimize.p_total", "must be > 0");
    for (const auto& l : links) require(l.bandwidth_b > 0, "optimize.bandwidth_b", "must be > 0");
    auto phi = [&](std::size_t k, double p) {
        const auto& l = links[k];
        const double r = shannon_rate(l.bandwidth_b, p, l.gain_h, l.noise_n0);
        const double slope = rate_power_slope(l.bandwidth_b, p, l.gain_h, l.noise_n0);
        // dC/dR at R -> 0+ is taken just above zero
        const double r_eval =
            r > 0 ? r : 1e-9 * shannon_rate(l.bandwidth_b, p_total, l.gain_h, l.noise_n0);
        return effcap_rate_derivative(mac, l.theta_k, r_eval) * slope;
    };
    const auto sol = dual_allocate(links.size(), p_total, phi);
    auto out = evaluate_allocation(mac, links, sol.x, Resource::Power, "effective_capacity");
    out.kkt_residual = sol.kkt_residual;
    out.iterations = sol.iterations;
    detail::check_solution(out, {waterfilling_baseline(mac, links, p_total),
                                 channel_inversion_baseline(mac, links, p_total)});
    return out;
}

// Water level mu with p_k = B_k max(0, mu - N0 / h_k); maximizes sum R_k.
inline AllocationResult waterfilling_baseline(const SharedMac& mac,
                                              const std::vector<ReceiverLink>& links,
                                              double p_total) {
    detail::validate_links(links);
    require(p_total > 0, "optimize.p_total", "must be > 0");
    auto powers = [&](double mu) {
        std::vector<double> p(links.size());
        for (std::size_t k = 0; k < links.size(); ++k) {
            const auto& l = links[k];
            p[k] = l.bandwidth_b * std::max(0.0, mu - l.noise_n0 / l.gain_h);
        }
        return p;
    };
    auto total = [&](double mu) {
        double s = 0;
        for (double v : powers(mu)) s += v;
        return s;
    };
    double lo = 0;
    double hi = 0;
    double b_sum = 0;
    for (const auto& l : links) {
        hi = std::max(hi, l.noise_n0 / l.gain_h);
        b_sum += l.bandwidth_b;
    }
    hi += p_total / b_sum;
    int it = 0;
    for (; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (total(mid) > p_total) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    auto p = powers(0.5 * (lo + hi));
    double s = 0;
    for (double v : p) s += v;
    for (auto& v : p) v *= p_total / s;
    auto out = evaluate_allocation(mac, links, p, Resource::Power, "water_filling");
    out.iterations = it;
    return out;
}

inline AllocationResult channel_inversion_baseline(const SharedMac& mac,
                                                   const std::vector<ReceiverLink>& links,
                                                   double p_total) {
    detail::validate_links(links);
    require(p_total > 0, "optimize.p_total", "must be > 0");
    double inv_sum = 0;
    for (const auto& l : links) inv_sum += 1.0 / l.gain_h;
    std::vector<double> p;
    for (const auto& l : links) p.push_back(p_total * (1.0 / l.gain_h) / inv_sum);
    return evaluate_allocation(mac, links, p, Resource::Power, "channel_inversion");
}

inline AllocationResult optimize_bandwidth(const SharedMac& mac,
                                           const std::vector<ReceiverLink>& links,
                                           double b_total) {
    detail::validate_links(links);
    require(b_total > 0, "optimize.b_total", "must be > 0");
    for (const auto& l : links) require(l.power_p > 0, "optimize.power_p", "must be > 0");
    auto phi = [&](std::size_t k, double b) {
        const auto& l = links[k];
        if (b <= 0) return std::numeric_limits<double>::infinity();
        const double r = shannon_rate(b, l.power_p, l.gain_h, l.noise_n0);
        return effcap_rate_derivative(mac, l.theta_k, r) *
               rate_bandwidth_slope(b, l.power_p, l.gain_h, l.noise_n0);
    };
    const auto sol = dual_allocate(links.size(), b_total, phi);
    auto out = evaluate_allocation(mac, links, sol.x, Resource::Bandwidth, "effective_capacity");
    out.kkt_residual = sol.kkt_residual;
    out.iterations = sol.iterations;
    detail::check_solution(out, {optimal_rate_baseline(mac, links, b_total),
                                 equal_bandwidth_baseline(mac, links, b_total)});
    return out;
}

// Bandwidth split that maximizes the sum of Shannon rates.
inline AllocationResult optimal_rate_baseline(const SharedMac& mac,
                                              const std::vector<ReceiverLink>& links,
                                              double b_total) {
    detail::validate_links(links);
    require(b_total > 0, "optimize.b_total", "must be > 0");
    auto phi = [&](std::size_t k, double b) {
        const auto& l = links[k];
        return rate_bandwidth_slope(b, l.power_p, l.gain_h, l.noise_n0);
    };
    const auto sol = dual_allocate(links.size(), b_total, phi);
    auto out = evaluate_allocation(mac, links, sol.x, Resource::Bandwidth, "optimal_rate");
    out.kkt_residual = sol.kkt_residual;
    out.iterations = sol.iterations;
    return out;
}

inline AllocationResult equal_bandwidth_baseline(const SharedMac& mac,
                                                 const std::vector<ReceiverLink>& links,
                                                 double b_total) {
    detail::validate_links(links);
    require(b_total > 0, "optimize.b_total", "must be > 0");
    std::vector<double> b(links.size(), b_total / links.size());
    return evaluate_allocation(mac, links, b, Resource::Bandwidth, "equal");
}

}  // namespace effcap
