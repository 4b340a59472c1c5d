#pragma once

// Effective capacity of a semi-Markov reward process.
//
// A state i with random sojourn T_i and reward rate r_i contributes the
// factor E[exp(theta * (c - r_i) * T_i)] to the diagonal matrix Gamma. The
// effective capacity is the c at which the Perron root of Gamma * P is one.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "effcap/error.hpp"
#include "effcap/root_finding.hpp"

namespace effcap {

using Mgf = std::function<double(double)>;

struct SemiMarkovModel {
    Eigen::MatrixXd transition;       // row-stochastic
    std::vector<Mgf> duration_mgf;    // s -> E[exp(s * duration)]
    std::vector<double> reward_rate;  // bits/s earned while in the state

    std::size_t states() const { return reward_rate.size(); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(states());
        require(n >= 1, "model.reward_rate", "needs at least one state");
        require(transition.rows() == n && transition.cols() == n, "model.transition",
                "must be square with one row per state");
        require(duration_mgf.size() == states(), "model.duration_mgf", "one MGF per state");
        for (Eigen::Index i = 0; i < n; ++i) {
            double row = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double v = transition(i, j);
                require(v >= 0.0 && v <= 1.0, "model.transition", "entries must lie in [0, 1]");
                row += v;
            }
            require(std::abs(row - 1.0) <= 1e-12, "model.transition", "rows must sum to 1");
            require(reward_rate[i] >= 0.0 && std::isfinite(reward_rate[i]), "model.reward_rate",
                    "rates must be finite and >= 0");
            require(std::abs(duration_mgf[i](0.0) - 1.0) <= 1e-12, "model.duration_mgf",
                    "every MGF must equal 1 at 0");
        }
    }
};

enum class SolverKind { ClosedForm, Spectral };

inline const char* to_string(SolverKind k) {
    return k == SolverKind::ClosedForm ? "closed_form" : "spectral";
}

struct EffCapResult {
    double c_theta = 0;  // bits/s
    double theta = 0;    // 1/bit
    SolverKind solver = SolverKind::ClosedForm;
    double residual = 0;
    Bracket bracket{0, 0};
};

namespace detail {

// States that some state can enter. The others contribute zero eigenvalues
// and are dropped so their (possibly huge) MGF rows do not cost accuracy.
inline std::vector<Eigen::Index> entered_states(const Eigen::MatrixXd& p) {
    const auto n = p.rows();
    std::vector<bool> keep(n, true);
    for (bool changed = true; changed;) {
        changed = false;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!keep[j]) continue;
            bool entered = false;
            for (Eigen::Index i = 0; i < n && !entered; ++i) entered = keep[i] && p(i, j) > 0;
            if (!entered) {
                keep[j] = false;
                changed = true;
            }
        }
    }
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (keep[j]) out.push_back(j);
    }
    return out;
}

}  // namespace detail

inline double spectral_radius(const SemiMarkovModel& model, double theta, double c) {
    const auto states = detail::entered_states(model.transition);
    const auto n = static_cast<Eigen::Index>(states.size());
    if (n == 0) return 0.0;
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto i = states[a];
        const double arg = theta * (c - model.reward_rate[i]);
        const double gamma = model.duration_mgf[i](arg);
        if (!std::isfinite(gamma) || gamma <= 0.0) {
            throw DivergenceError("duration MGF of state " + std::to_string(i) +
                                  " diverges at argument " + std::to_string(arg));
        }
        for (Eigen::Index b = 0; b < n; ++b) m(a, b) = gamma * model.transition(i, states[b]);
    }
    if (n == 1) return std::abs(m(0, 0));
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw Error("eigen decomposition failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Root of rho(theta, c) = 1 over c in [0, max reward rate].
inline EffCapResult effcap_spectral(const SemiMarkovModel& model, double theta) {
    model.validate();
    require(theta > 0 && std::isfinite(theta), "theta", "must be > 0");
    double r_max = 0;
    for (double r : model.reward_rate) r_max = std::max(r_max, r);

    // every MGF argument grows with c, so divergence means rho is above 1
    auto gap = [&](double c) {
        try {
            return spectral_radius(model, theta, c) - 1.0;
        } catch (const DivergenceError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    constexpr double slack = 1e-12;
    const double g_lo = spectral_radius(model, theta, 0.0) - 1.0;
    const double g_hi = gap(r_max);
    if (g_lo > slack || g_hi < -slack) {
        throw InfeasibleError("spectral radius does not cross 1 on [0, R]: rho(0) = " +
                              std::to_string(g_lo + 1) +
                              ", rho(R) = " + std::to_string(g_hi + 1));
    }
    // rho must be non-decreasing in c for the crossing to be unique
    constexpr int probes = 16;
    double prev = g_lo;
    for (int i = 1; i <= probes; ++i) {
        const double g = gap(r_max * i / probes);
        if (g < prev - 1e-12 * (1 + std::abs(prev))) {
            throw InfeasibleError("spectral radius is not monotone in c on [0, R]");
        }
        prev = g;
    }

    EffCapResult out;
    out.theta = theta;
    out.solver = SolverKind::Spectral;
    if (r_max == 0.0) {
        out.bracket = {0, 0};
    } else {
        out.bracket = bisect_increasing(gap, 0.0, r_max, 1e-14 * r_max);
    }
    out.c_theta = out.bracket.mid();
    out.residual = std::abs(gap(out.c_theta));
    if (out.residual > 1e-9 && out.bracket.width() > 2e-14 * r_max) {
        throw ConvergenceError("spectral bisection left |rho - 1| above 1e-9", out.residual);
    }
    return out;
}

}  // namespace effcap
