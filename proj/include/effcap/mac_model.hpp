#pragma once

// Contention model for a tagged LAA transmitter sharing an unlicensed channel
// with other LAA and Wi-Fi transmitters.
//
// The per-slot attempt probabilities come from the saturated binary
// exponential backoff fixed point (one coupled equation per class). From the
// solved operating point we build the moment generating functions of the
// random access delay that precedes a delivered packet's final transmission
// (OFF2) and of the delay of a packet dropped at the retry limit (OFF3).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "effcap/error.hpp"
#include "effcap/root_finding.hpp"

namespace effcap {

enum class CwPolicy { FCW, VCW };

inline const char* to_string(CwPolicy p) { return p == CwPolicy::FCW ? "FCW" : "VCW"; }

struct ContentionConfig {
    int n_laa = 1;     // LAA transmitters, tagged one included
    int m_wifi = 0;    // Wi-Fi transmitters
    CwPolicy policy = CwPolicy::VCW;
    int w0 = 16;       // initial contention window, slots
    int max_stage = 6; // window doublings (VCW only)
    int retry_limit = 7;
    double sigma = 9e-6;   // idle slot, s
    double t_s = 1.009e-3; // slot busy with another node's success, s
    double t_c = 1.009e-3; // slot busy with a collision, s
    double t_f = 1e-3;     // tagged node's collision-free transmission, s
    int wifi_w0 = 16;
    int wifi_max_stage = 6;
    int wifi_retry_limit = 7;

    void validate() const {
        require(n_laa >= 1, "mac.n_laa", "must be >= 1");
        require(m_wifi >= 0, "mac.m_wifi", "must be >= 0");
        require(w0 >= 1, "mac.w0", "must be >= 1");
        require(max_stage >= 0 && max_stage <= 30, "mac.max_stage", "must be in [0, 30]");
        require(retry_limit >= 1, "mac.retry_limit", "must be >= 1");
        require(std::isfinite(sigma) && sigma > 0, "mac.sigma", "must be > 0");
        require(std::isfinite(t_s) && t_s >= sigma, "mac.t_s", "must be >= sigma");
        require(std::isfinite(t_c) && t_c >= sigma, "mac.t_c", "must be >= sigma");
        require(std::isfinite(t_f) && t_f > 0, "mac.t_f", "must be > 0");
        require(wifi_w0 >= 1, "mac.wifi_w0", "must be >= 1");
        require(wifi_max_stage >= 0 && wifi_max_stage <= 30, "mac.wifi_max_stage",
                "must be in [0, 30]");
        require(wifi_retry_limit >= 1, "mac.wifi_retry_limit", "must be >= 1");
    }
};

// Contention window for the given (zero-based) backoff stage.
inline int stage_window(CwPolicy policy, int w0, int max_stage, int stage) {
    if (policy == CwPolicy::FCW) return w0;
    const int doublings = std::min(stage, max_stage);
    return w0 << doublings;
}

inline int laa_window(const ContentionConfig& cfg, int stage) {
    return stage_window(cfg.policy, cfg.w0, cfg.max_stage, stage);
}

inline int wifi_window(const ContentionConfig& cfg, int stage) {
    return stage_window(CwPolicy::VCW, cfg.wifi_w0, cfg.wifi_max_stage, stage);
}

struct MacOperatingPoint {
    double tau_laa = 0;
    double tau_wifi = 0;
    double p_laa = 0;
    double p_wifi = 0;
    double p_idle = 1;
    double p_other_succ = 0;
    double p_other_coll = 0;
    double residual = 0;
    int iterations = 0;
};

namespace detail {

// Per-slot attempt probability of a saturated node whose collision
// probability is p: attempts per cycle over slots per cycle, where the cycle
// runs until delivery or the retry limit, and stage j costs (W_j + 1) / 2
// slots on average (uniform counter in [0, W_j - 1] plus the attempt itself).
// With an unbounded retry limit this is the classic Bianchi relation.
inline double attempt_probability(CwPolicy policy, int w0, int max_stage, int retry_limit,
                                  double p) {
    if (policy == CwPolicy::FCW) return 2.0 / (w0 + 1.0);
    double attempts = 0;
    double slots = 0;
    double pj = 1;
    for (int j = 0; j < retry_limit; ++j) {
        attempts += pj;
        slots += pj * (stage_window(policy, w0, max_stage, j) + 1.0) / 2.0;
        pj *= p;
        if (pj == 0.0) break;
    }
    return attempts / slots;
}

inline double laa_tau(const ContentionConfig& cfg, double p) {
    return attempt_probability(cfg.policy, cfg.w0, cfg.max_stage, cfg.retry_limit, p);
}

inline double wifi_tau(const ContentionConfig& cfg, double p) {
    return attempt_probability(CwPolicy::VCW, cfg.wifi_w0, cfg.wifi_max_stage,
                               cfg.wifi_retry_limit, p);
}

inline double pow_int(double base, int e) {
    return e <= 0 ? 1.0 : std::pow(base, e);
}

inline double laa_collision(const ContentionConfig& cfg, double tau_l, double tau_w) {
    return 1.0 - pow_int(1 - tau_l, cfg.n_laa - 1) * pow_int(1 - tau_w, cfg.m_wifi);
}

inline double wifi_collision(const ContentionConfig& cfg, double tau_l, double tau_w) {
    return 1.0 - pow_int(1 - tau_l, cfg.n_laa) * pow_int(1 - tau_w, cfg.m_wifi - 1);
}

// Wi-Fi attempt probability consistent with a given LAA attempt probability.
inline double wifi_tau_given_laa(const ContentionConfig& cfg, double tau_l) {
    if (cfg.m_wifi == 0) return 0.0;
    auto gap = [&](double tw) { return tw - wifi_tau(cfg, wifi_collision(cfg, tau_l, tw)); };
    return bisect_increasing(gap, 0.0, 1.0, 1e-15).mid();
}

// Number of sign changes of p -> p - p_laa(tau_laa(p)) over a sweep of
// [0, 1), with the Wi-Fi class solved exactly at every probe. Each change
// brackets one fixed point.
inline int count_fixed_points(const ContentionConfig& cfg, int probes = 1000) {
    int roots = 0;
    bool prev_positive = false;
    for (int i = 0; i <= probes; ++i) {
        const double p = (1.0 - 1e-9) * i / probes;
        const double tl = laa_tau(cfg, p);
        const double tw = wifi_tau_given_laa(cfg, tl);
        const bool positive = p - laa_collision(cfg, tl, tw) > 0;
        if (i > 0 && positive != prev_positive) ++roots;
        prev_positive = positive;
    }
    return roots;
}

}  // namespace detail

// Slot-class probabilities seen from the tagged node's backoff counter.
inline void fill_slot_classes(const ContentionConfig& cfg, MacOperatingPoint& op) {
    const int others_l = cfg.n_laa - 1;
    const int others_w = cfg.m_wifi;
    const double ql = 1 - op.tau_laa;
    const double qw = 1 - op.tau_wifi;
    op.p_idle = detail::pow_int(ql, others_l) * detail::pow_int(qw, others_w);
    double succ = 0;
    if (others_l >= 1) {
        succ += others_l * op.tau_laa * detail::pow_int(ql, others_l - 1) *
                detail::pow_int(qw, others_w);
    }
    if (others_w >= 1) {
        succ += others_w * op.tau_wifi * detail::pow_int(qw, others_w - 1) *
                detail::pow_int(ql, others_l);
    }
    op.p_other_succ = succ;
    op.p_other_coll = std::max(0.0, 1.0 - op.p_idle - op.p_other_succ);
    op.p_laa = 1.0 - op.p_idle;
    op.p_wifi = cfg.m_wifi > 0 ? detail::wifi_collision(cfg, op.tau_laa, op.tau_wifi) : 0.0;
}

// Joint fixed point of the LAA and Wi-Fi attempt-probability maps, by damped
// Picard iteration. A sign sweep over p_laa rejects configurations with more
// than one fixed point.
inline MacOperatingPoint solve_operating_point(const ContentionConfig& cfg) {
    cfg.validate();
    constexpr double damping = 0.5;
    constexpr int max_iter = 10000;
    constexpr double tol = 1e-10;

    double tl = detail::laa_tau(cfg, 0.0);
    double tw = cfg.m_wifi > 0 ? detail::wifi_tau(cfg, 0.0) : 0.0;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
        const double tl_map = detail::laa_tau(cfg, detail::laa_collision(cfg, tl, tw));
        const double tw_map =
            cfg.m_wifi > 0 ? detail::wifi_tau(cfg, detail::wifi_collision(cfg, tl, tw)) : 0.0;
        residual = std::max(std::abs(tl - tl_map), std::abs(tw - tw_map));
        if (residual <= 1e-3 * tol) break;
        tl = (1 - damping) * tl + damping * tl_map;
        tw = (1 - damping) * tw + damping * tw_map;
    }
    if (residual > tol) {
        throw ConvergenceError("contention fixed point did not converge in " +
                                   std::to_string(max_iter) + " iterations",
                               residual);
    }
    if (const int roots = detail::count_fixed_points(cfg); roots > 1) {
        throw InfeasibleError("contention fixed point is not unique (" + std::to_string(roots) +
                              " roots found in p_laa sweep)");
    }

    MacOperatingPoint op;
    op.tau_laa = tl;
    op.tau_wifi = tw;
    op.residual = residual;
    op.iterations = it;
    fill_slot_classes(cfg, op);
    return op;
}

// Duration transform of one backoff slot of the tagged node:
// E[exp(s * slot)] with slot in {sigma, t_s, t_c}.
inline double slot_mgf(const ContentionConfig& cfg, const MacOperatingPoint& op, double s) {
    return op.p_idle * std::exp(s * cfg.sigma) + op.p_other_succ * std::exp(s * cfg.t_s) +
           op.p_other_coll * std::exp(s * cfg.t_c);
}

// Value and first derivative (in s) of a transform.
struct TransformValue {
    double value = 1;
    double slope = 0;
};

namespace detail {

// g(s) - 1 and g'(s) without cancellation near s = 0.
inline TransformValue slot_mgf_minus_one(const ContentionConfig& cfg, const MacOperatingPoint& op,
                                         double s) {
    TransformValue r;
    r.value = op.p_idle * std::expm1(s * cfg.sigma) + op.p_other_succ * std::expm1(s * cfg.t_s) +
              op.p_other_coll * std::expm1(s * cfg.t_c);
    r.slope = op.p_idle * cfg.sigma * std::exp(s * cfg.sigma) +
              op.p_other_succ * cfg.t_s * std::exp(s * cfg.t_s) +
              op.p_other_coll * cfg.t_c * std::exp(s * cfg.t_c);
    return r;
}

// E[(1 + x)^U] for U uniform on {0, ..., W-1}, and its derivative in x.
// Equals ((1 + x)^W - 1) / (W x); the power series is used near x = 0.
inline TransformValue uniform_counter_pgf(int w, double x) {
    TransformValue r;
    if (w == 1) return {1.0, 0.0};
    const double wx = w * x;
    if (std::abs(wx) <= 0.5) {
        // coefficient of x^j is C(W, j+1) / W
        double coef = 1.0;
        double xp = 1.0;
        double val = 1.0;
        double der = 0.0;
        for (int j = 1; j < w; ++j) {
            coef *= static_cast<double>(w - j) / (j + 1);
            der += j * coef * xp;
            xp *= x;
            const double term = coef * xp;
            val += term;
            if (std::abs(term) < 1e-18 * val) break;
        }
        r.value = val;
        r.slope = der;
        return r;
    }
    const double lg = std::log1p(x);
    if (w * lg > 700.0) {
        throw DivergenceError("backoff transform overflows: window " + std::to_string(w) +
                              " at slot-transform excess " + std::to_string(x));
    }
    const double pw1 = std::exp((w - 1) * lg);  // (1+x)^(W-1)
    r.value = std::expm1(w * lg) / wx;
    r.slope = (pw1 * (wx - (1 + x)) + 1.0) / (w * x * x);
    return r;
}

inline void check_collision_probability(const MacOperatingPoint& op) {
    if (!(op.p_laa >= 0.0 && op.p_laa < 1.0)) {
        throw DivergenceError("backoff transforms need 0 <= p_laa < 1, got " +
                              std::to_string(op.p_laa));
    }
}

inline void check_finite(const TransformValue& t, const char* what) {
    if (!std::isfinite(t.value) || !std::isfinite(t.slope)) {
        throw DivergenceError(std::string(what) + " is not finite at the requested argument");
    }
}

}  // namespace detail

// Transform of the random access delay of a packet that is eventually
// delivered: all backoff slots plus the tagged node's own collided attempts
// (t_c each), conditioned on delivery within retry_limit attempts.
inline TransformValue pgf_delivered_d(const ContentionConfig& cfg, const MacOperatingPoint& op,
                                      double s) {
    detail::check_collision_probability(op);
    const auto g = detail::slot_mgf_minus_one(cfg, op, s);
    const double p = op.p_laa;
    const int k_max = cfg.retry_limit;
    const double deliver_norm = p > 0 ? -std::expm1(k_max * std::log(p)) : 1.0;  // 1 - p^K

    double prod = 1.0;    // product of stage transforms so far
    double logder = 0.0;  // d/ds log(prod)
    double weight = (1 - p) / deliver_norm;
    TransformValue out{0.0, 0.0};
    for (int k = 1; k <= k_max; ++k) {
        const auto b = detail::uniform_counter_pgf(laa_window(cfg, k - 1), g.value);
        prod *= b.value;
        logder += b.slope * g.slope / b.value;
        const double own = std::exp(s * cfg.t_c * (k - 1));
        const double term = weight * prod * own;
        out.value += term;
        out.slope += term * (logder + cfg.t_c * (k - 1));
        weight *= p;
        if (weight == 0.0) break;
    }
    detail::check_finite(out, "delivered-packet backoff transform");
    return out;
}

// Transform of the delay of a packet dropped after retry_limit collisions.
inline TransformValue pgf_dropped_d(const ContentionConfig& cfg, const MacOperatingPoint& op,
                                    double s) {
    detail::check_collision_probability(op);
    const auto g = detail::slot_mgf_minus_one(cfg, op, s);
    double prod = 1.0;
    double logder = 0.0;
    for (int j = 0; j < cfg.retry_limit; ++j) {
        const auto b = detail::uniform_counter_pgf(laa_window(cfg, j), g.value);
        prod *= b.value;
        logder += b.slope * g.slope / b.value;
    }
    const double own_time = cfg.t_c * cfg.retry_limit;
    TransformValue out;
    out.value = prod * std::exp(s * own_time);
    out.slope = out.value * (logder + own_time);
    detail::check_finite(out, "dropped-packet backoff transform");
    return out;
}

inline double pgf_delivered(const ContentionConfig& cfg, const MacOperatingPoint& op, double s) {
    return pgf_delivered_d(cfg, op, s).value;
}

inline double pgf_dropped(const ContentionConfig& cfg, const MacOperatingPoint& op, double s) {
    return pgf_dropped_d(cfg, op, s).value;
}

// Mean access delays (first derivatives of the transforms at zero).
inline double mean_delivered_delay(const ContentionConfig& cfg, const MacOperatingPoint& op) {
    return pgf_delivered_d(cfg, op, 0.0).slope;
}

inline double mean_dropped_delay(const ContentionConfig& cfg, const MacOperatingPoint& op) {
    return pgf_dropped_d(cfg, op, 0.0).slope;
}

}  // namespace effcap
