#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "effcap/admission.hpp"
#include "effcap/dinkelbach.hpp"
#include "effcap/effcap.hpp"
#include "effcap/error.hpp"
#include "effcap/optimizers.hpp"
#include "oracles.hpp"

using namespace effcap;

namespace {

SharedMac shared(int n = 5, int m = 5, double eps = 0.1) {
    ContentionConfig cfg;
    cfg.n_laa = n;
    cfg.m_wifi = m;
    return SharedMac::solve(cfg, eps);
}

constexpr double kN0 = 4e-21;

std::vector<ReceiverLink> links(const std::vector<double>& gains, double theta, double b,
                                double p) {
    std::vector<ReceiverLink> out;
    for (double h : gains) out.push_back({h, kN0, theta, b, p});
    return out;
}

double closed_form_at(const SharedMac& mac, double theta, double rate) {
    return effcap_closed_form({rate, mac.per_eps}, mac.cfg, mac.op, theta).c_theta;
}

}  // namespace

TEST(Optimizers, RateDerivativeMatchesFiniteDifference) {
    const auto mac = shared();
    for (double theta : {1e-7, 1e-6, 1e-5, 1e-4, 1e-3}) {
        for (double r : {1e4, 1e5, 1e6, 1e7}) {
            // beyond theta R T_f = 1, dC/dR falls below the root solver's resolution
            if (theta * r * mac.cfg.t_f > 1) continue;
            const double h = 1e-4 * r;
            const double fd =
                (closed_form_at(mac, theta, r + h) - closed_form_at(mac, theta, r - h)) / (2 * h);
            EXPECT_NEAR(effcap_rate_derivative(mac, theta, r) / fd, 1.0, 1e-4)
                << "theta=" << theta << " R=" << r;
        }
    }
}

TEST(Optimizers, CapacityIsConcaveInRate) {
    const auto mac = shared();
    for (double theta : {1e-6, 1e-5, 1e-3}) {
        for (double r : {1e5, 1e6, 1e7}) {
            const double h = 0.05 * r;
            const double d2 = closed_form_at(mac, theta, r - h) - 2 * closed_form_at(mac, theta, r) +
                              closed_form_at(mac, theta, r + h);
            EXPECT_LT(d2, 0.0) << "theta=" << theta << " R=" << r;
        }
    }
}

TEST(Optimizers, NewtonRootMatchesBisection) {
    const auto mac = shared();
    for (double theta : {1e-8, 1e-5, 1e-2}) {
        for (double r : {1e4, 1e6, 1e8}) {
            // small theta R leaves C fixed by the equation only to ~1e-9
            EXPECT_NEAR(effcap_at_rate(mac, theta, r) / closed_form_at(mac, theta, r), 1.0, 1e-8);
        }
    }
}

TEST(Optimizers, IdenticalReceiversSplitEvenly) {
    const auto mac = shared();
    const auto ls = links({1e-12, 1e-12, 1e-12}, 1e-4, 1e6, 0.03);
    const auto p = optimize_power(mac, ls, 0.09);
    const auto b = optimize_bandwidth(mac, ls, 3e6);
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(p.allocation[k], 0.03, 1e-6 * 0.03);
        EXPECT_NEAR(b.allocation[k], 1e6, 1e-6 * 1e6);
    }
}

TEST(Optimizers, SingleReceiverTakesEverything) {
    const auto mac = shared();
    const auto ls = links({3e-12}, 1e-5, 1e6, 0.05);
    EXPECT_NEAR(optimize_power(mac, ls, 0.05).allocation[0], 0.05, 1e-12);
    EXPECT_NEAR(optimize_bandwidth(mac, ls, 2e6).allocation[0], 2e6, 1e-6);
}

TEST(Optimizers, WaterFillingTwoUsers) {
    const auto mac = shared();
    const double h = 1e-12;
    const double b = 1e6;
    for (double p_total : {0.05, 1e-3, 1e-5}) {
        const auto ls = links({h, h / 4}, 1e-5, b, 0);
        const auto wf = waterfilling_baseline(mac, ls, p_total);
        const auto [p1, p2] = oracle::waterfill_two(h, h / 4, kN0, b, p_total);
        EXPECT_NEAR(wf.allocation[0], p1, 1e-9 * p_total);
        EXPECT_NEAR(wf.allocation[1], p2, 1e-9 * p_total);
    }
}

TEST(Optimizers, ChannelInversionSplit) {
    const auto mac = shared();
    const auto ci = channel_inversion_baseline(mac, links({1.0, 2.0}, 1e-5, 1e6, 0), 1.0);
    EXPECT_NEAR(ci.allocation[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(ci.allocation[1], 1.0 / 3.0, 1e-15);
}

TEST(Optimizers, LooseQosReducesToWaterFilling) {
    const auto mac = shared();
    const double p_total = 0.02;
    const auto ls = links({2e-13, 1e-12, 6e-12}, 1e-9, 1e6, 0);
    const auto opt = optimize_power(mac, ls, p_total);
    const auto wf = waterfilling_baseline(mac, ls, p_total);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(opt.allocation[k], wf.allocation[k], 1e-3 * p_total);
}

TEST(Optimizers, PowerMatchesGridSearch) {
    const auto mac = shared();
    const int steps = 2000;
    const double p_total = 0.02;
    for (const auto& gains : {std::vector<double>{3e-13, 4e-12},
                              std::vector<double>{2e-13, 1e-12, 6e-12}}) {
        for (double theta : {1e-6, 1e-4, 1e-3}) {
            const auto ls = links(gains, theta, 1e6, 0);
            std::vector<std::vector<double>> f(ls.size(), std::vector<double>(steps + 1));
            for (std::size_t k = 0; k < ls.size(); ++k) {
                for (int i = 0; i <= steps; ++i) {
                    const double r = shannon_rate(1e6, p_total * i / steps, ls[k].gain_h, kN0);
                    f[k][i] = effcap_at_rate(mac, theta, r);
                }
            }
            const double grid = oracle::grid_max(f, steps);
            const double got = optimize_power(mac, ls, p_total).objective;
            EXPECT_GE(got, grid * (1 - 1e-12));
            EXPECT_LE((got - grid) / grid, 1e-4);
        }
    }
}

TEST(Optimizers, BandwidthMatchesGridSearch) {
    const auto mac = shared();
    const int steps = 2000;
    const double b_total = 3e6;
    for (const auto& gains : {std::vector<double>{3e-13, 4e-12},
                              std::vector<double>{2e-13, 1e-12, 6e-12}}) {
        for (double theta : {1e-6, 1e-4, 1e-3}) {
            const auto ls = links(gains, theta, 0, 0.01);
            std::vector<std::vector<double>> f(ls.size(), std::vector<double>(steps + 1));
            for (std::size_t k = 0; k < ls.size(); ++k) {
                for (int i = 0; i <= steps; ++i) {
                    const double r = shannon_rate(b_total * i / steps, 0.01, ls[k].gain_h, kN0);
                    f[k][i] = effcap_at_rate(mac, theta, r);
                }
            }
            const double grid = oracle::grid_max(f, steps);
            const double got = optimize_bandwidth(mac, ls, b_total).objective;
            EXPECT_GE(got, grid * (1 - 1e-12));
            EXPECT_LE((got - grid) / grid, 1e-4);
        }
    }
}

TEST(Optimizers, DinkelbachLinearObjectiveStaysAtMinimum) {
    auto f = [](double p) { return ValueSlope{3 * p, 3}; };
    const auto r = dinkelbach_max_ratio(f, 0.1, 2.0);
    EXPECT_DOUBLE_EQ(r.p_star, 0.1);
    EXPECT_NEAR(r.ratio, 3.0, 1e-12);
}

TEST(Optimizers, DinkelbachInteriorOptimum) {
    // log(1 + p) / (p + 1) peaks where log(1 + p) = 1
    auto f = [](double p) { return ValueSlope{std::log1p(p), 1 / (1 + p)}; };
    const auto r = dinkelbach_max_ratio(f, 0.01, 10.0, 1.0);
    EXPECT_NEAR(r.p_star, std::exp(1.0) - 1, 1e-6);
    for (std::size_t i = 1; i < r.lambdas.size(); ++i) EXPECT_GE(r.lambdas[i], r.lambdas[i - 1]);
}

TEST(Optimizers, EnergyEfficiencyMatchesGrid) {
    const auto mac = shared();
    const ReceiverLink l{1e-12, kN0, 1e-4, 1e6, 0};
    const double p_min = 1e-4;
    const double p_max = 0.2;
    const double circuit = 0.01;
    const auto r = dinkelbach_eee(mac, l, p_min, p_max, circuit);
    double best = 0;
    for (int i = 0; i <= 20000; ++i) {
        const double p = p_min + (p_max - p_min) * i / 20000;
        best = std::max(best, effcap_at_rate(mac, l.theta_k, shannon_rate(l.bandwidth_b, p, l.gain_h,
                                                                          l.noise_n0)) /
                                  (p + circuit));
    }
    EXPECT_GE(r.ratio, best * (1 - 1e-9));
    EXPECT_LE((r.ratio - best) / best, 1e-6);
    for (std::size_t i = 1; i < r.lambdas.size(); ++i) EXPECT_GE(r.lambdas[i], r.lambdas[i - 1]);
}

TEST(Optimizers, EnergyEfficiencyWithoutCircuitPowerPrefersMinimum) {
    const auto mac = shared();
    const ReceiverLink l{1e-12, kN0, 1e-4, 1e6, 0};
    EXPECT_DOUBLE_EQ(dinkelbach_eee(mac, l, 1e-4, 0.2).p_star, 1e-4);
}

TEST(Optimizers, EnergyEfficiencyOfDeadLinkIsZero) {
    const auto mac = shared(5, 5, 1.0);
    const ReceiverLink l{1e-12, kN0, 1e-4, 1e6, 0};
    const auto r = dinkelbach_eee(mac, l, 1e-4, 0.2, 0.01);
    EXPECT_DOUBLE_EQ(r.ratio, 0.0);
    EXPECT_DOUBLE_EQ(r.p_star, 1e-4);
}

TEST(Optimizers, RejectsEmptyReceiverSet) {
    const auto mac = shared();
    try {
        optimize_power(mac, {}, 1.0);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "optimize.receivers");
    }
}

namespace {

Flow flow(double rate, double d_max) {
    Flow f;
    f.rate_demand = rate;
    f.qos.d_max = d_max;
    f.qos.p_th = 1e-2;
    return f;
}

}  // namespace

TEST(Admission, TinyDemandIsAccepted) {
    ContentionConfig cfg;
    cfg.n_laa = 3;
    cfg.m_wifi = 2;
    const auto d = admission_control({}, flow(1e-9, 1.0), cfg, {1e6, 0.1});
    EXPECT_TRUE(d.accept);
    EXPECT_GT(d.margin, 0);
    EXPECT_EQ(d.n_laa_after, 4);
}

TEST(Admission, DemandAboveThroughputIsRejected) {
    ContentionConfig cfg;
    cfg.n_laa = 3;
    cfg.m_wifi = 2;
    const LinkParams link{1e6, 0.1};
    auto after = cfg;
    after.n_laa += 1;
    const double s = mean_throughput(link, after, solve_operating_point(after));
    const auto d = admission_control({}, flow(1.01 * s, 1.0), cfg, link);
    EXPECT_FALSE(d.accept);
    EXPECT_LT(d.margin, 0);
}

TEST(Admission, BoundaryDemandHasZeroMargin) {
    ContentionConfig cfg;
    cfg.n_laa = 2;
    cfg.m_wifi = 3;
    const LinkParams link{1e6, 0.1};
    const auto probe = admission_control({}, flow(0, 0.5), cfg, link);
    ASSERT_TRUE(probe.accept);
    const auto at = admission_control({}, flow(probe.boundary_rate, 0.5), cfg, link);
    EXPECT_TRUE(at.accept);
    EXPECT_NEAR(at.margin, 0.0, 1e-9 * probe.boundary_rate);
    // the boundary point satisfies theta * C(theta) * d = ln(eta / p_th)
    EXPECT_NEAR(at.theta * at.boundary_rate * 0.5, std::log(100.0), 1e-9);
}

TEST(Admission, UnattainableDelayBoundExplainsItself) {
    ContentionConfig cfg;
    cfg.n_laa = 4;
    cfg.m_wifi = 2;
    const auto d = admission_control({}, flow(1e3, 1e-3), cfg, {1e6, 0.1});
    EXPECT_FALSE(d.accept);
    EXPECT_NE(d.diagnostic.find("unattainable"), std::string::npos);
}

TEST(Admission, NewcomerCanDisplaceCurrentFlows) {
    ContentionConfig cfg;
    cfg.n_laa = 3;
    cfg.m_wifi = 2;
    const LinkParams link{1e6, 0.1};
    // a current flow sitting exactly on today's boundary
    const auto op = solve_operating_point(cfg);
    const auto b = boundary_rate(link, cfg, op, 1.0, 1e-2, 1.0);
    ASSERT_TRUE(b.attainable);
    const auto d = admission_control({flow(b.rate, 1.0)}, flow(1.0, 1.0), cfg, link);
    EXPECT_FALSE(d.accept);
    ASSERT_EQ(d.displaced.size(), 1u);
    EXPECT_EQ(d.displaced[0], 0u);
}

TEST(Admission, RejectsNegativeDemand) {
    try {
        admission_control({}, flow(-1, 1.0), ContentionConfig{}, {1e6, 0.0});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "qos.candidate.rate_demand");
    }
}
