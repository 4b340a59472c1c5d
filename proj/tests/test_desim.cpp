#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "effcap/desim.hpp"
#include "effcap/effcap.hpp"
#include "effcap/error.hpp"

using namespace effcap;

namespace {

SimConfig solitary(int w0) {
    SimConfig sc;
    sc.cfg.n_laa = 1;
    sc.cfg.m_wifi = 0;
    sc.cfg.policy = CwPolicy::FCW;
    sc.cfg.w0 = w0;
    sc.horizon_slots = 400000;
    return sc;
}

}  // namespace

TEST(Desim, UnitWindowSendsBackToBack) {
    const auto sc = solitary(1);
    const auto st = run_sim(sc);
    EXPECT_EQ(st.delivered_packets, st.slots);
    EXPECT_NEAR(st.throughput(), sc.packet_size / sc.cfg.t_f, 1e-9 * st.throughput());
}

TEST(Desim, SolitaryNodeWaitsMeanBackoff) {
    auto sc = solitary(16);
    const auto st = run_sim(sc);
    const double expect = sc.packet_size / (sc.cfg.t_f + 7.5 * sc.cfg.sigma);
    EXPECT_NEAR(st.throughput() / expect, 1.0, 1e-2);
    EXPECT_EQ(st.tagged_collisions, 0);
}

TEST(Desim, NoArrivalsNoThroughput) {
    auto sc = solitary(16);
    sc.cfg.n_laa = 3;
    sc.cfg.m_wifi = 2;
    sc.tagged_arrival_rate = 0;
    const auto st = run_sim(sc);
    EXPECT_EQ(st.arrived_packets, 0);
    EXPECT_EQ(st.delivered_packets, 0);
    EXPECT_DOUBLE_EQ(st.throughput(), 0.0);
    EXPECT_EQ(st.node_attempts[0], 0);
}

TEST(Desim, PacketsAreConserved) {
    SimConfig sc;
    sc.cfg.n_laa = 4;
    sc.cfg.m_wifi = 3;
    sc.cfg.retry_limit = 2;
    sc.horizon_slots = 300000;
    sc.per_eps = 0.2;
    for (double rate : {2e4, 1e5, 1e6, kSaturated}) {
        sc.tagged_arrival_rate = rate;
        const auto st = run_sim(sc);
        EXPECT_EQ(st.arrived_packets,
                  st.delivered_packets + st.dropped_packets + st.backlog_packets);
        EXPECT_GT(st.dropped_packets, 0);
        EXPECT_EQ(static_cast<std::int64_t>(st.delays_s.size()), st.delivered_packets);
    }
}

TEST(Desim, SameSeedSameRun) {
    SimConfig sc;
    sc.cfg.n_laa = 3;
    sc.cfg.m_wifi = 4;
    sc.horizon_slots = 100000;
    sc.per_eps = 0.1;
    sc.tagged_arrival_rate = 2e5;
    sc.seed = 42;
    const auto a = run_sim(sc);
    const auto b = run_sim(sc);
    EXPECT_EQ(a.delays_s, b.delays_s);
    EXPECT_EQ(a.block_bits, b.block_bits);
    EXPECT_EQ(a.node_collisions, b.node_collisions);
    sc.seed = 43;
    EXPECT_NE(run_sim(sc).delays_s, a.delays_s);
}

TEST(Desim, IdenticalNodesCollideAlike) {
    SimConfig sc;
    sc.cfg.n_laa = 6;
    sc.cfg.m_wifi = 0;
    sc.horizon_slots = 1000000;
    sc.seed = 5;
    const auto st = run_sim(sc);
    const auto n = sc.cfg.n_laa;
    double total = 0;
    for (int i = 0; i < n; ++i) total += st.node_collisions[i];
    const double expect = total / n;
    double chi2 = 0;
    for (int i = 0; i < n; ++i) {
        chi2 += (st.node_collisions[i] - expect) * (st.node_collisions[i] - expect) / expect;
    }
    const boost::math::chi_squared dist(n - 1);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3) << "chi2=" << chi2;
}

TEST(Desim, SimulatedCollisionRateTracksModel) {
    SimConfig sc;
    sc.cfg.n_laa = 6;
    sc.cfg.m_wifi = 4;
    sc.horizon_slots = 1000000;
    const auto op = solve_operating_point(sc.cfg);
    const auto st = run_sim(sc);
    EXPECT_NEAR(st.collision_rate() / op.p_laa, 1.0, 0.03);
}

TEST(Desim, WilsonInterval) {
    const auto w = wilson_interval(10, 100);
    EXPECT_DOUBLE_EQ(w.value, 0.1);
    EXPECT_NEAR(w.lower, 0.0552, 1e-4);
    EXPECT_NEAR(w.upper, 0.1744, 1e-4);
    const auto z = wilson_interval(0, 1000);
    EXPECT_NEAR(z.lower, 0.0, 1e-15);
    EXPECT_GT(z.upper, 0.0);
}

TEST(Desim, DeterministicServiceEstimateIsThroughput) {
    const auto st = run_sim(solitary(1));
    ASSERT_GE(st.block_bits.size(), 100u);
    for (double theta : {1e-8, 1e-5, 1e-2}) {
        const auto e = estimate_effcap(st, theta);
        EXPECT_NEAR(e.value / st.throughput(), 1.0, 1e-12);
        EXPECT_NEAR(e.std_error, 0.0, 1e-9 * e.value);
    }
}

TEST(Desim, EstimatorNeedsEnoughBlocks) {
    auto sc = solitary(16);
    sc.horizon_slots = 1000;
    const auto st = run_sim(sc);
    EXPECT_THROW(estimate_effcap(st, 1e-6), ValidationError);
    EXPECT_THROW(estimate_delay_violation(st, 0.1), ValidationError);
}

TEST(Desim, DelayViolationWithinFactorOfBound) {
    const LinkParams link{1e6, 0.1};
    const double load = 0.7;
    for (auto [n, m] : {std::pair{3, 2}, std::pair{5, 5}}) {
        ContentionConfig cfg;
        cfg.n_laa = n;
        cfg.m_wifi = m;
        const auto op = solve_operating_point(cfg);
        const double lambda = load * mean_throughput(link, cfg, op);
        // QoS exponent at which the link sustains exactly lambda
        double lo = 1e-9;
        double hi = 1;
        for (int i = 0; i < 200; ++i) {
            const double mid = std::sqrt(lo * hi);
            (effcap_closed_form(link, cfg, op, mid).c_theta > lambda ? lo : hi) = mid;
        }
        const double theta = std::sqrt(lo * hi);

        SimConfig sc;
        sc.cfg = cfg;
        sc.horizon_slots = 16000000;
        sc.seed = 3;
        sc.tagged_arrival_rate = lambda;
        sc.packet_size = link.rate_r * cfg.t_f;
        sc.per_eps = link.per_eps;
        const auto st = run_sim(sc);
        int checked = 0;
        for (double d = 0.005; d < 3; d *= 1.25) {
            const auto emp = estimate_delay_violation(st, d);
            if (emp.value < 1e-4 || emp.value > 1e-1) continue;
            const double bound = load * std::exp(-theta * lambda * d);
            EXPECT_GT(emp.value / bound, 1.0 / 3) << "N=" << n << " M=" << m << " d=" << d;
            EXPECT_LT(emp.value / bound, 3.0) << "N=" << n << " M=" << m << " d=" << d;
            ++checked;
        }
        EXPECT_GE(checked, 5);
    }
}

TEST(Desim, RejectsBadConfig) {
    SimConfig sc;
    sc.horizon_slots = 0;
    try {
        run_sim(sc);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "sim.horizon_slots");
    }
}
