#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "effcap/effcap.hpp"
#include "effcap/error.hpp"
#include "effcap/semi_markov.hpp"
#include "oracles.hpp"

using namespace effcap;

namespace {

ContentionConfig make(CwPolicy pol, int n, int m) {
    ContentionConfig c;
    c.policy = pol;
    c.n_laa = n;
    c.m_wifi = m;
    return c;
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, i / (n - 1.0)));
    return g;
}

SemiMarkovModel on_off_model(double r, double alpha, double beta) {
    auto exp_mgf = [](double rate) {
        return [rate](double s) {
            return s < rate ? rate / (rate - s) : std::numeric_limits<double>::infinity();
        };
    };
    SemiMarkovModel m;
    m.transition = Eigen::MatrixXd(2, 2);
    m.transition << 0, 1, 1, 0;
    m.duration_mgf = {exp_mgf(alpha), exp_mgf(beta)};
    m.reward_rate = {r, 0};
    return m;
}

}  // namespace

TEST(EffCap, SpectralMatchesOnOffEigenvalue) {
    const double r = 1e6;
    const double alpha = 200;
    const double beta = 300;
    const auto model = on_off_model(r, alpha, beta);
    for (double theta : log_grid(1e-8, 1e-3, 100)) {
        const double expect = oracle::on_off_effcap(r, alpha, beta, theta);
        const double got = effcap_spectral(model, theta).c_theta;
        EXPECT_NEAR(got / expect, 1.0, 1e-8) << "theta=" << theta;
    }
}

TEST(EffCap, ContentionFreeLinkDeliversLineRate) {
    ContentionConfig cfg = make(CwPolicy::FCW, 1, 0);
    cfg.w0 = 1;
    cfg.retry_limit = 1;
    const LinkParams link{2e6, 0.0};
    const auto op = solve_operating_point(cfg);
    for (double theta : {1e-8, 1e-5, 1e-2}) {
        EXPECT_NEAR(effcap_closed_form(link, cfg, op, theta).c_theta / link.rate_r, 1.0, 1e-12);
        EXPECT_NEAR(effcap_spectral(link, cfg, op, theta).c_theta / link.rate_r, 1.0, 1e-9);
    }
}

TEST(EffCap, CertainErrorGivesZeroCapacity) {
    const auto cfg = make(CwPolicy::VCW, 3, 2);
    const auto op = solve_operating_point(cfg);
    const LinkParams link{1e6, 1.0};
    for (double theta : {1e-6, 1e-4}) {
        EXPECT_LE(effcap_closed_form(link, cfg, op, theta).c_theta, 1e-13 * link.rate_r);
        EXPECT_LE(effcap_spectral(link, cfg, op, theta).c_theta, 1e-13 * link.rate_r);
    }
}

TEST(EffCap, SolversAgree) {
    for (auto pol : {CwPolicy::FCW, CwPolicy::VCW}) {
        for (int n : {1, 4, 12}) {
            for (int m : {0, 6}) {
                for (double eps : {0.0, 0.2}) {
                    const auto cfg = make(pol, n, m);
                    const auto op = solve_operating_point(cfg);
                    const LinkParams link{1e6, eps};
                    for (double theta : {1e-7, 1e-5, 1e-3}) {
                        const double a = effcap_closed_form(link, cfg, op, theta).c_theta;
                        const double b = effcap_spectral(link, cfg, op, theta).c_theta;
                        EXPECT_NEAR(a / b, 1.0, 1e-6);
                    }
                }
            }
        }
    }
}

TEST(EffCap, SmallExponentApproachesThroughput) {
    for (auto pol : {CwPolicy::FCW, CwPolicy::VCW}) {
        for (int n : {1, 5, 20}) {
            const auto cfg = make(pol, n, 5);
            const auto op = solve_operating_point(cfg);
            const LinkParams link{1e6, 0.1};
            const double s = mean_throughput(link, cfg, op);
            EXPECT_NEAR(effcap_closed_form(link, cfg, op, 1e-10).c_theta / s, 1.0, 1e-3);
        }
    }
}

TEST(EffCap, DecreasesWithExponentAndVanishes) {
    const auto cfg = make(CwPolicy::VCW, 5, 5);
    const auto op = solve_operating_point(cfg);
    const LinkParams link{1e6, 0.1};
    double prev = std::numeric_limits<double>::infinity();
    for (double theta : log_grid(1e-9, 10, 60)) {
        const double c = effcap_closed_form(link, cfg, op, theta).c_theta;
        EXPECT_LE(c, prev);
        prev = c;
    }
    EXPECT_LT(prev, 1e-3 * link.rate_r);
}

TEST(EffCap, DelayViolationBound) {
    EffCapResult c;
    c.c_theta = 5e5;
    QosSpec q;
    q.theta = 1e-5;
    q.d_max = 0.2;
    q.eta = 0.5;
    EXPECT_NEAR(delay_violation(c, q), 0.5 * std::exp(-1.0), 1e-15);
    q.d_max = 0;
    q.eta = 1;
    EXPECT_DOUBLE_EQ(delay_violation(c, q), 1.0);
}

TEST(EffCap, RegionPointAtUnitExponent) {
    const auto cfg = make(CwPolicy::VCW, 3, 1);
    const LinkParams link{1e6, 0.0};
    const double theta = 1e-5;
    const auto region = qos_region(link, cfg, std::exp(-1.0), 1.0, {theta});
    ASSERT_EQ(region.boundary.size(), 1u);
    const auto& pt = region.boundary[0];
    EXPECT_NEAR(pt.d_max, 1.0 / (theta * pt.rate), 1e-12 * pt.d_max);
}

TEST(EffCap, LooserThresholdGivesTighterDelays) {
    const auto cfg = make(CwPolicy::FCW, 4, 4);
    const LinkParams link{1e6, 0.1};
    const auto grid = log_grid(1e-7, 1e-3, 12);
    const auto strict = qos_region(link, cfg, 1e-3, 1.0, grid);
    const auto loose = qos_region(link, cfg, 1e-1, 1.0, grid);
    ASSERT_EQ(strict.boundary.size(), loose.boundary.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_DOUBLE_EQ(loose.boundary[i].rate, strict.boundary[i].rate);
        EXPECT_LT(loose.boundary[i].d_max, strict.boundary[i].d_max);
    }
}

TEST(EffCap, PolicyRegionsCrossInCrowdedNetwork) {
    const LinkParams link{1e6, 0.1};
    const std::vector<double> grid = {1e-7, 1e-3};
    const auto fcw = qos_region(link, make(CwPolicy::FCW, 15, 15), 1e-2, 1.0, grid);
    const auto vcw = qos_region(link, make(CwPolicy::VCW, 15, 15), 1e-2, 1.0, grid);
    // loose QoS favours the variable window, stringent QoS the fixed one
    EXPECT_GT(vcw.boundary[0].rate, fcw.boundary[0].rate);
    EXPECT_LT(vcw.boundary[1].rate, fcw.boundary[1].rate);
}

TEST(EffCap, RejectsBadExponent) {
    const auto cfg = make(CwPolicy::VCW, 2, 0);
    const auto op = solve_operating_point(cfg);
    try {
        effcap_closed_form({1e6, 0.0}, cfg, op, -1.0);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "theta");
    }
    EXPECT_THROW(effcap_spectral({1e6, 1.5}, cfg, op, 1e-6), ValidationError);
}

TEST(EffCap, SpectralRejectsMalformedModel) {
    auto m = on_off_model(1e6, 10, 10);
    m.transition(0, 0) = 0.5;
    EXPECT_THROW(effcap_spectral(m, 1e-6), ValidationError);
}
