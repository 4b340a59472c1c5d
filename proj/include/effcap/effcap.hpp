#pragma once

// Effective capacity of a tagged LAA link.
//
// One contention cycle of the tagged transmitter is a four-state semi-Markov
// process: the access delay of a packet that is eventually delivered (OFF2),
// followed by either a successful transmission (ON) or a collision-free but
// erroneous one (OFF1), or the access delay of a packet that is dropped after
// retry_limit collisions (OFF3). The effective capacity C(theta) solves
//
//   (1 - p^K) t1(theta C) [ (1-eps) e^{theta (C - R) T_f} + eps e^{theta C T_f} ]
//       + p^K t2(theta C) = 1
//
// where t1, t2 are the access-delay transforms built by mac_model.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "effcap/error.hpp"
#include "effcap/mac_model.hpp"
#include "effcap/root_finding.hpp"
#include "effcap/semi_markov.hpp"

namespace effcap {

struct QosSpec {
    double theta = 1e-6;  // 1/bit
    double d_max = 0.1;   // s
    double p_th = 1e-2;
    double eta = 1.0;     // probability of a non-empty queue

    void validate() const {
        require(theta > 0 && std::isfinite(theta), "qos.theta", "must be > 0");
        require(d_max > 0, "qos.d_max", "must be > 0");
        require(p_th > 0 && p_th < 1, "qos.p_th", "must lie in (0, 1)");
        require(eta > 0 && eta <= 1, "qos.eta", "must lie in (0, 1]");
    }
};

struct LinkParams {
    double rate_r = 1e6;  // bits/s during a transmission
    double per_eps = 0;   // error rate of collision-free transmissions

    void validate() const {
        require(rate_r > 0 && std::isfinite(rate_r), "link.rate_r", "must be > 0");
        require(per_eps >= 0 && per_eps <= 1, "link.per_eps", "must lie in [0, 1]");
    }
};

// Probability that a packet is dropped at the retry limit, p^K.
inline double drop_probability(const ContentionConfig& cfg, const MacOperatingPoint& op) {
    return std::pow(op.p_laa, cfg.retry_limit);
}

// Value of the left-hand side of the capacity equation and its partial
// derivatives in C and R.
struct LhsPartials {
    double value = 0;
    double d_c = 0;
    double d_r = 0;
};

inline LhsPartials closed_form_lhs_partials(const LinkParams& link, const ContentionConfig& cfg,
                                            const MacOperatingPoint& op, double theta, double c) {
    const double drop = drop_probability(cfg, op);
    const double deliver = 1.0 - drop;
    const double s = theta * c;
    const double eps = link.per_eps;
    const double e_on = std::exp(theta * (c - link.rate_r) * cfg.t_f);
    const double e_err = std::exp(s * cfg.t_f);
    const double a = (1 - eps) * e_on + eps * e_err;

    LhsPartials out;
    if (deliver > 0) {
        const auto t1 = pgf_delivered_d(cfg, op, s);
        out.value += deliver * t1.value * a;
        out.d_c += theta * deliver * (t1.slope * a + t1.value * cfg.t_f * a);
        out.d_r += deliver * t1.value * (1 - eps) * e_on * (-theta * cfg.t_f);
    }
    if (drop > 0) {
        const auto t2 = pgf_dropped_d(cfg, op, s);
        out.value += drop * t2.value;
        out.d_c += theta * drop * t2.slope;
    }
    if (!std::isfinite(out.value) || !std::isfinite(out.d_c)) {
        throw DivergenceError("capacity equation overflows at C = " + std::to_string(c));
    }
    return out;
}

inline double closed_form_lhs(const LinkParams& link, const ContentionConfig& cfg,
                              const MacOperatingPoint& op, double theta, double c) {
    return closed_form_lhs_partials(link, cfg, op, theta, c).value;
}

// Long-run throughput of the tagged link: the theta -> 0 limit of C(theta).
inline double mean_throughput(const LinkParams& link, const ContentionConfig& cfg,
                              const MacOperatingPoint& op) {
    const double drop = drop_probability(cfg, op);
    const double deliver = 1.0 - drop;
    if (deliver <= 0) return 0.0;
    double cycle = deliver * (mean_delivered_delay(cfg, op) + cfg.t_f);
    if (drop > 0) cycle += drop * mean_dropped_delay(cfg, op);
    return link.rate_r * cfg.t_f * (1 - link.per_eps) * deliver / cycle;
}

inline EffCapResult effcap_closed_form(const LinkParams& link, const ContentionConfig& cfg,
                                       const MacOperatingPoint& op, double theta) {
    link.validate();
    require(theta > 0 && std::isfinite(theta), "theta", "must be > 0");
    const double r = link.rate_r;

    EffCapResult out;
    out.theta = theta;
    out.solver = SolverKind::ClosedForm;
    if (drop_probability(cfg, op) >= 1.0) {
        // every packet is dropped: nothing is ever delivered
        out.bracket = {0, 0};
        return out;
    }

    // LHS is increasing in C, so an overflow means "far above 1"
    auto gap = [&](double c) {
        try {
            return closed_form_lhs(link, cfg, op, theta, c) - 1.0;
        } catch (const DivergenceError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    const double g0 = closed_form_lhs(link, cfg, op, theta, 0.0) - 1.0;
    if (g0 > 1e-12) {
        throw InfeasibleError("capacity equation has LHS(0) = " + std::to_string(g0 + 1) +
                              " > 1; model is infeasible");
    }
    constexpr int probes = 16;
    double prev = g0;
    for (int i = 1; i <= probes; ++i) {
        const double g = gap(r * i / probes);
        const double ulp_slack = 8 * std::numeric_limits<double>::epsilon() * (1 + std::abs(g));
        if (g <= prev - ulp_slack) {
            throw InfeasibleError("capacity equation LHS is not increasing in C");
        }
        prev = g;
    }

    out.bracket = bisect_increasing(gap, 0.0, r, 1e-14 * r);
    out.c_theta = out.bracket.mid();
    out.residual = std::abs(gap(out.c_theta));
    // a steep LHS can leave a residual above 1e-9 on a bracket at resolution
    if (out.residual > 1e-9 && out.bracket.width() > 2e-14 * r) {
        throw ConvergenceError("closed-form bisection left |LHS - 1| above 1e-9", out.residual);
    }
    return out;
}

// The same link written as a generic semi-Markov reward process, states
// ordered {ON, OFF1, OFF2, OFF3}.
inline SemiMarkovModel make_laa_model(const LinkParams& link, const ContentionConfig& cfg,
                                      const MacOperatingPoint& op) {
    link.validate();
    enum { ON, OFF1, OFF2, OFF3 };
    const double drop = drop_probability(cfg, op);
    const double deliver = 1.0 - drop;
    const double eps = link.per_eps;

    SemiMarkovModel m;
    m.transition = Eigen::MatrixXd::Zero(4, 4);
    for (int from : {ON, OFF1, OFF3}) {
        m.transition(from, OFF2) = deliver;
        m.transition(from, OFF3) = drop;
    }
    m.transition(OFF2, ON) = 1 - eps;
    m.transition(OFF2, OFF1) = eps;

    const double tf = cfg.t_f;
    m.duration_mgf = {
        [tf](double s) { return std::exp(s * tf); },
        [tf](double s) { return std::exp(s * tf); },
        [cfg, op](double s) { return pgf_delivered(cfg, op, s); },
        [cfg, op](double s) { return pgf_dropped(cfg, op, s); },
    };
    m.reward_rate = {link.rate_r, 0.0, 0.0, 0.0};
    return m;
}

inline EffCapResult effcap_spectral(const LinkParams& link, const ContentionConfig& cfg,
                                    const MacOperatingPoint& op, double theta) {
    return effcap_spectral(make_laa_model(link, cfg, op), theta);
}

inline double delay_violation(const EffCapResult& c, const QosSpec& spec) {
    return std::min(1.0, spec.eta * std::exp(-spec.theta * c.c_theta * spec.d_max));
}

struct RegionPoint {
    double theta = 0;
    double rate = 0;   // C(theta), bits/s
    double d_max = 0;  // s
};

struct QosRegion {
    std::vector<RegionPoint> boundary;
    std::vector<std::string> diagnostics;
};

// Delay bound reachable at rate C(theta) with violation probability p_th.
inline double region_delay(double theta, double rate, double p_th, double eta) {
    return std::max(0.0, -std::log(p_th / eta) / (theta * rate));
}

// Boundary of the (rate, delay bound) region for a violation threshold
// p_th. When eta is not given, each point uses eta = C(theta) / throughput,
// i.e. the point's rate offered as constant arrivals.
inline QosRegion qos_region(const LinkParams& link, const ContentionConfig& cfg, double p_th,
                            std::optional<double> eta, const std::vector<double>& theta_grid) {
    require(p_th > 0 && p_th < 1, "qos.p_th", "must lie in (0, 1)");
    if (eta) require(*eta > 0 && *eta <= 1, "qos.eta", "must lie in (0, 1]");
    require(!theta_grid.empty(), "theta_grid", "must not be empty");
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        require(theta_grid[i] > 0, "theta_grid", "values must be > 0");
        if (i > 0) require(theta_grid[i] > theta_grid[i - 1], "theta_grid", "must be ascending");
    }

    const auto op = solve_operating_point(cfg);
    const double throughput = mean_throughput(link, cfg, op);
    QosRegion region;
    for (double theta : theta_grid) {
        const auto c = effcap_closed_form(link, cfg, op, theta);
        if (c.c_theta <= 0) {
            region.diagnostics.push_back("theta=" + std::to_string(theta) +
                                         ": C(theta)=0, point omitted");
            continue;
        }
        const double e = eta ? *eta : std::min(1.0, c.c_theta / throughput);
        region.boundary.push_back({theta, c.c_theta, region_delay(theta, c.c_theta, p_th, e)});
    }
    return region;
}

}  // namespace effcap
