#pragma once

// Admission control on the (rate, delay bound) region.
//
// Every flow is carried by its own LAA transmitter with the same link
// parameters, so admitting a candidate adds one LAA contender. A flow
// (demand r, bound d, threshold p_th, eta) fits when the boundary rate at d,
// C(theta*) with theta* C(theta*) = ln(eta / p_th) / d, is at least r.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "effcap/effcap.hpp"
#include "effcap/error.hpp"
#include "effcap/mac_model.hpp"

namespace effcap {

struct Flow {
    QosSpec qos;               // d_max, p_th and eta are used; theta is ignored
    double rate_demand = 0;    // bits/s
};

struct BoundaryRate {
    bool attainable = false;
    double rate = 0;   // largest sustainable rate at the delay bound
    double theta = 0;  // QoS exponent of the boundary point
    std::string diagnostic;
};

// Largest rate whose delay bound d_max holds with violation probability
// p_th, for a network already solved into `op`.
inline BoundaryRate boundary_rate(const LinkParams& link, const ContentionConfig& cfg,
                                  const MacOperatingPoint& op, double d_max, double p_th,
                                  double eta) {
    BoundaryRate out;
    const double throughput = mean_throughput(link, cfg, op);
    if (throughput <= 0) {
        out.diagnostic = "region is empty: the link delivers nothing";
        return out;
    }
    const double target = std::log(eta / p_th) / d_max;  // required theta * C(theta)
    if (target <= 0) {
        // violation probability already below p_th at any delay
        out.attainable = true;
        out.rate = throughput;
        return out;
    }
    auto theta_c = [&](double theta) {
        return theta * effcap_closed_form(link, cfg, op, theta).c_theta;
    };
    // theta * C(theta) <= theta * throughput, so this theta is not past the target
    double lo = target / throughput;
    double hi = lo;
    const double theta_cap = 1e6 / (link.rate_r * cfg.t_f);
    while (theta_c(hi) < target) {
        lo = hi;
        hi *= 2;
        if (hi > theta_cap) {
            // theta * C(theta) saturates; its supremum sets the tightest bound
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "delay bound %.6g s is unattainable; smallest bound at p_th %.3g is "
                          "%.6g s",
                          d_max, p_th, std::log(eta / p_th) / theta_c(theta_cap));
            out.diagnostic = buf;
            return out;
        }
    }
    // theta * C(theta) is increasing; bisect in log(theta)
    for (int i = 0; i < 200 && hi / lo > 1 + 1e-13; ++i) {
        const double m = std::sqrt(lo * hi);
        if (theta_c(m) < target) {
            lo = m;
        } else {
            hi = m;
        }
    }
    out.theta = std::sqrt(lo * hi);
    out.rate = effcap_closed_form(link, cfg, op, out.theta).c_theta;
    out.attainable = true;
    return out;
}

struct AdmissionDecision {
    bool accept = false;
    double margin = 0;          // boundary rate minus demand, bits/s
    double boundary_rate = 0;
    double theta = 0;
    int n_laa_after = 0;
    std::vector<std::size_t> displaced;  // current flows pushed outside the region
    std::string diagnostic;
};

inline AdmissionDecision admission_control(const std::vector<Flow>& current, const Flow& candidate,
                                           const ContentionConfig& network,
                                           const LinkParams& link) {
    require(candidate.rate_demand >= 0 && std::isfinite(candidate.rate_demand),
            "qos.candidate.rate_demand", "must be >= 0");
    candidate.qos.validate();
    for (const auto& f : current) f.qos.validate();
    link.validate();

    ContentionConfig after = network;
    after.n_laa += 1;
    const auto op = solve_operating_point(after);

    AdmissionDecision d;
    d.n_laa_after = after.n_laa;
    const auto b = boundary_rate(link, after, op, candidate.qos.d_max, candidate.qos.p_th,
                                 candidate.qos.eta);
    if (!b.attainable) {
        d.diagnostic = b.diagnostic;
        return d;
    }
    d.boundary_rate = b.rate;
    d.theta = b.theta;
    d.margin = b.rate - candidate.rate_demand;
    for (std::size_t i = 0; i < current.size(); ++i) {
        const auto& f = current[i];
        const auto bf = boundary_rate(link, after, op, f.qos.d_max, f.qos.p_th, f.qos.eta);
        if (!bf.attainable || bf.rate < f.rate_demand) d.displaced.push_back(i);
    }
    d.accept = d.margin >= 0 && d.displaced.empty();
    if (d.margin < 0) {
        d.diagnostic = "demand exceeds the region boundary at the delay bound";
    } else if (!d.displaced.empty()) {
        d.diagnostic = "admission would push " + std::to_string(d.displaced.size()) +
                       " current flow(s) outside the region";
    }
    return d;
}

}  // namespace effcap
