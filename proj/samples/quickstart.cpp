// Effective capacity of a tagged LAA link sharing the channel with Wi-Fi,
// its delay-violation bound, and an admission decision for a new flow.

#include <cstdio>

#include "effcap/admission.hpp"
#include "effcap/effcap.hpp"
#include "effcap/mac_model.hpp"

int main() {
    using namespace effcap;

    ContentionConfig cfg;
    cfg.policy = CwPolicy::VCW;
    cfg.n_laa = 4;
    cfg.m_wifi = 6;
    const LinkParams link{1e6, 0.1};

    const auto op = solve_operating_point(cfg);
    std::printf("collision probability %.4f, attempt probability %.4f\n", op.p_laa, op.tau_laa);
    std::printf("mean throughput %.1f bit/s\n", mean_throughput(link, cfg, op));

    for (double theta : {1e-6, 1e-5, 1e-4}) {
        const auto c = effcap_closed_form(link, cfg, op, theta);
        QosSpec q;
        q.theta = theta;
        q.d_max = 0.2;
        std::printf("theta %.0e: C = %.1f bit/s, P(delay > 0.2 s) <= %.3e\n", theta, c.c_theta,
                    delay_violation(c, q));
    }

    auto flow = [](double rate, double d_max) {
        Flow f;
        f.rate_demand = rate;
        f.qos.d_max = d_max;
        return f;
    };
    const std::vector<Flow> current = {flow(20000, 0.5), flow(20000, 0.5)};
    const auto d = admission_control(current, flow(30000, 0.5), cfg, link);
    std::printf("admit 30 kbit/s within 0.5 s: %s (margin %.1f bit/s)\n",
                d.accept ? "yes" : "no", d.margin);
}
