#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "effcap/admission.hpp"
#include "effcap/cli/scenario.hpp"
#include "effcap/desim.hpp"
#include "effcap/dinkelbach.hpp"
#include "effcap/effcap.hpp"
#include "effcap/mac_model.hpp"
#include "effcap/optimizers.hpp"

namespace effcap::cli {

enum class PolicySel { FCW, VCW, Both };

struct Options {
    PolicySel policy = PolicySel::Both;
    std::optional<std::uint64_t> seed;
    std::optional<double> rate_demand;  // admit
    unsigned threads = 0;               // 0: hardware concurrency
};

// A result table. Cells are JSON scalars; null prints as an empty CSV cell.
struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<Json>> rows;
    std::vector<std::string> warnings;
};

inline std::string format_cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.10g", v.get<double>());
        return buf;
    }
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

inline void write_csv(const Table& t, std::ostream& os) {
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << "\n";
    }
}

inline Json to_json(const Table& t) {
    Json rows = Json::array();
    for (const auto& row : t.rows) {
        Json obj = Json::object();
        for (std::size_t i = 0; i < row.size(); ++i) obj[t.header[i]] = row[i];
        rows.push_back(obj);
    }
    return {{"command", t.name}, {"rows", rows}, {"warnings", t.warnings}};
}

namespace detail {

// Runs fn(i) for i in [0, n) on a small worker pool; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads,
                            const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

// Same, but a failing index yields nullopt and a message instead of throwing.
template <class T>
std::vector<std::optional<T>> parallel_try_map(std::size_t n, unsigned threads,
                                               const std::function<T(std::size_t)>& fn,
                                               std::vector<std::string>& messages) {
    std::vector<std::string> msg(n);
    auto rows = parallel_map<std::optional<T>>(n, threads, [&](std::size_t i) -> std::optional<T> {
        try {
            return fn(i);
        } catch (const std::exception& e) {
            msg[i] = e.what();
            return std::nullopt;
        }
    });
    messages = std::move(msg);
    return rows;
}

inline std::vector<CwPolicy> policies(const Scenario& sc, PolicySel sel) {
    switch (sel) {
        case PolicySel::FCW: return {CwPolicy::FCW};
        case PolicySel::VCW: return {CwPolicy::VCW};
        case PolicySel::Both: break;
    }
    (void)sc;
    return {CwPolicy::FCW, CwPolicy::VCW};
}

// Optimizer commands work on one policy: the flag if given, else the scenario's.
inline CwPolicy single_policy(const Scenario& sc, PolicySel sel) {
    if (sel == PolicySel::FCW) return CwPolicy::FCW;
    if (sel == PolicySel::VCW) return CwPolicy::VCW;
    return sc.mac.policy;
}

inline ContentionConfig with_policy(ContentionConfig cfg, CwPolicy p) {
    cfg.policy = p;
    return cfg;
}

inline std::uint64_t seed_of(const Scenario& sc, const Options& opt) {
    return opt.seed.value_or(sc.sim.seed);
}

inline Json num_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

}  // namespace detail

inline Table cmd_analyze(const Scenario& sc, const Options& opt) {
    Table t{"analyze",
            {"policy", "n_laa", "m_wifi", "theta", "p_laa", "tau_laa", "throughput", "C_closed",
             "C_spectral", "rel_diff", "d_max", "p_violation"},
            {},
            {}};
    const auto pols = detail::policies(sc, opt.policy);
    t.rows = detail::parallel_map<std::vector<Json>>(
        pols.size(), opt.threads, [&](std::size_t i) {
            const auto cfg = detail::with_policy(sc.mac, pols[i]);
            const auto op = solve_operating_point(cfg);
            const auto cf = effcap_closed_form(sc.link, cfg, op, sc.qos.theta);
            const auto sp = effcap_spectral(sc.link, cfg, op, sc.qos.theta);
            const double rel =
                cf.c_theta > 0 ? std::abs(cf.c_theta - sp.c_theta) / cf.c_theta
                               : std::abs(cf.c_theta - sp.c_theta);
            return std::vector<Json>{to_string(pols[i]), cfg.n_laa, cfg.m_wifi, sc.qos.theta,
                                     op.p_laa, op.tau_laa, mean_throughput(sc.link, cfg, op),
                                     cf.c_theta, sp.c_theta, rel, sc.qos.d_max,
                                     delay_violation(cf, sc.qos)};
        });
    return t;
}

inline Table cmd_sweep_theta(const Scenario& sc, const Options& opt) {
    Table t{"sweep-theta", {"theta", "policy", "C_analytical", "C_sim", "sim_stderr"}, {}, {}};
    const auto pols = detail::policies(sc, opt.policy);
    const auto& grid = sc.theta_grid;

    std::vector<std::string> sim_err;
    const auto sims = detail::parallel_try_map<SimStats>(
        pols.size(), opt.threads,
        [&](std::size_t i) {
            auto cfg = sc.sim_config(detail::with_policy(sc.mac, pols[i]));
            cfg.seed = detail::seed_of(sc, opt);
            cfg.record_trace = false;
            return run_sim(cfg);
        },
        sim_err);

    struct Row {
        std::optional<double> c, c_sim, se;
        std::string warning;
    };
    const std::size_t n = grid.size() * pols.size();
    auto rows = detail::parallel_map<Row>(n, opt.threads, [&](std::size_t idx) {
        const double theta = grid[idx / pols.size()];
        const std::size_t k = idx % pols.size();
        Row r;
        std::string w;
        try {
            const auto cfg = detail::with_policy(sc.mac, pols[k]);
            r.c = effcap_closed_form(sc.link, cfg, solve_operating_point(cfg), theta).c_theta;
        } catch (const std::exception& e) {
            w += std::string("analysis: ") + e.what();
        }
        if (sims[k]) {
            try {
                const auto est = estimate_effcap(*sims[k], theta);
                r.c_sim = est.value;
                r.se = est.std_error;
            } catch (const std::exception& e) {
                w += std::string(w.empty() ? "" : "; ") + "simulation: " + e.what();
            }
        } else {
            w += std::string(w.empty() ? "" : "; ") + "simulation: " + sim_err[k];
        }
        r.warning = w;
        return r;
    });
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double theta = grid[idx / pols.size()];
        const char* pol = to_string(pols[idx % pols.size()]);
        const auto& r = rows[idx];
        t.rows.push_back({theta, pol, detail::num_or_null(r.c), detail::num_or_null(r.c_sim),
                          detail::num_or_null(r.se)});
        if (!r.warning.empty()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "theta=%.10g policy=%s: ", theta, pol);
            t.warnings.push_back(buf + r.warning);
        }
    }
    return t;
}

inline Table cmd_sweep_density(const Scenario& sc, const Options& opt) {
    Table t{"sweep-density", {"density", "policy", "total_effcap"}, {}, {}};
    require(!sc.sweep.densities.empty(), "sweep.densities", "must not be empty");
    const auto pols = detail::policies(sc, opt.policy);
    const auto& dens = sc.sweep.densities;
    const std::size_t n = dens.size() * pols.size();
    std::vector<std::string> errs;
    const auto vals = detail::parallel_try_map<double>(
        n, opt.threads,
        [&](std::size_t idx) {
            auto cfg = detail::with_policy(sc.mac, pols[idx % pols.size()]);
            cfg.n_laa = sc.laa_count(dens[idx / pols.size()]);
            const auto op = solve_operating_point(cfg);
            return cfg.n_laa * effcap_closed_form(sc.link, cfg, op, sc.sweep.theta).c_theta;
        },
        errs);
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double d = dens[idx / pols.size()];
        const char* pol = to_string(pols[idx % pols.size()]);
        t.rows.push_back({d, pol, detail::num_or_null(vals[idx])});
        if (!vals[idx]) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "density=%.10g policy=%s: ", d, pol);
            t.warnings.push_back(buf + errs[idx]);
        }
    }
    return t;
}

inline Table cmd_region(const Scenario& sc, const Options& opt) {
    Table t{"region", {"rate", "d_max", "policy"}, {}, {}};
    const auto pols = detail::policies(sc, opt.policy);
    const auto regions = detail::parallel_map<QosRegion>(pols.size(), opt.threads,
                                                         [&](std::size_t i) {
        return qos_region(sc.link, detail::with_policy(sc.mac, pols[i]), sc.qos.p_th,
                          sc.region_eta, sc.theta_grid);
    });
    for (std::size_t i = 0; i < pols.size(); ++i) {
        for (const auto& p : regions[i].boundary) t.rows.push_back({p.rate, p.d_max, to_string(pols[i])});
        for (const auto& d : regions[i].diagnostics) {
            t.warnings.push_back(std::string("policy=") + to_string(pols[i]) + ": " + d);
        }
    }
    return t;
}

namespace detail {

inline Table allocation_table(const Scenario& sc, const Options& opt, const char* name,
                              const std::function<std::vector<AllocationResult>(
                                  const SharedMac&, const std::vector<ReceiverLink>&)>& run) {
    require(!sc.optimize.receivers.empty(), "optimize.gains", "need at least one receiver");
    Table t{name, {"theta", "strategy", "objective"}, {}, {}};
    const auto mac = SharedMac::solve(with_policy(sc.mac, single_policy(sc, opt.policy)),
                                      sc.link.per_eps);
    const auto& grid = sc.optimize.theta_grid;
    const auto results = parallel_map<std::vector<AllocationResult>>(
        grid.size(), opt.threads,
        [&](std::size_t i) { return run(mac, sc.receivers(grid[i])); });
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (const auto& r : results[i]) t.rows.push_back({grid[i], r.strategy, r.objective});
    }
    return t;
}

}  // namespace detail

inline Table cmd_power_opt(const Scenario& sc, const Options& opt) {
    const double p = sc.optimize.p_total;
    return detail::allocation_table(sc, opt, "power-opt", [p](const auto& mac, const auto& links) {
        return std::vector<AllocationResult>{optimize_power(mac, links, p),
                                             waterfilling_baseline(mac, links, p),
                                             channel_inversion_baseline(mac, links, p)};
    });
}

inline Table cmd_bandwidth_opt(const Scenario& sc, const Options& opt) {
    const double b = sc.optimize.b_total;
    return detail::allocation_table(sc, opt, "bandwidth-opt",
                                    [b](const auto& mac, const auto& links) {
        return std::vector<AllocationResult>{optimize_bandwidth(mac, links, b),
                                             optimal_rate_baseline(mac, links, b),
                                             equal_bandwidth_baseline(mac, links, b)};
    });
}

inline Table cmd_eee(const Scenario& sc, const Options& opt) {
    require(!sc.optimize.receivers.empty(), "optimize.gains", "need at least one receiver");
    Table t{"eee",
            {"policy", "receiver", "theta", "p_star", "eee", "effcap", "circuit_power",
             "iterations"},
            {},
            {}};
    const auto pols = detail::policies(sc, opt.policy);
    const auto& o = sc.optimize;
    t.rows = detail::parallel_map<std::vector<Json>>(pols.size(), opt.threads,
                                                     [&](std::size_t i) {
        const auto mac = SharedMac::solve(detail::with_policy(sc.mac, pols[i]), sc.link.per_eps);
        const auto link = sc.receivers(sc.qos.theta)[o.eee_receiver];
        const auto r = dinkelbach_eee(mac, link, o.p_min, o.p_max, o.circuit_power);
        return std::vector<Json>{to_string(pols[i]), o.eee_receiver, sc.qos.theta, r.p_star,
                                 r.ratio, r.ratio * (r.p_star + o.circuit_power),
                                 o.circuit_power, r.iterations};
    });
    return t;
}

inline Table cmd_admit(const Scenario& sc, const Options& opt) {
    Table t{"admit",
            {"policy", "accept", "rate_demand", "d_max", "margin", "boundary_rate", "theta",
             "n_laa_after", "displaced", "diagnostic"},
            {},
            {}};
    Flow cand = sc.candidate;
    if (opt.rate_demand) cand.rate_demand = *opt.rate_demand;
    const auto pols = detail::policies(sc, opt.policy);
    t.rows = detail::parallel_map<std::vector<Json>>(pols.size(), opt.threads,
                                                     [&](std::size_t i) {
        const auto d =
            admission_control(sc.flows, cand, detail::with_policy(sc.mac, pols[i]), sc.link);
        std::string displaced;
        for (auto k : d.displaced) displaced += (displaced.empty() ? "" : " ") + std::to_string(k);
        return std::vector<Json>{to_string(pols[i]), d.accept, cand.rate_demand, cand.qos.d_max,
                                 d.margin, d.boundary_rate, d.theta, d.n_laa_after, displaced,
                                 d.diagnostic};
    });
    return t;
}

struct SimulateResult {
    Table table;
    std::vector<std::pair<CwPolicy, SimStats>> runs;
};

inline SimulateResult cmd_simulate(const Scenario& sc, const Options& opt) {
    SimulateResult out;
    auto& t = out.table;
    t = {"simulate",
         {"policy", "seed", "slots", "elapsed_s", "arrived_bits", "delivered_bits", "dropped_bits",
          "backlog_bits", "throughput", "collision_rate", "p_laa_analytic", "mean_delay_s"},
         {},
         {}};
    const auto pols = detail::policies(sc, opt.policy);
    const auto seed = detail::seed_of(sc, opt);
    const auto stats = detail::parallel_map<SimStats>(pols.size(), opt.threads,
                                                      [&](std::size_t i) {
        auto cfg = sc.sim_config(detail::with_policy(sc.mac, pols[i]));
        cfg.seed = seed;
        return run_sim(cfg);
    });
    for (std::size_t i = 0; i < pols.size(); ++i) {
        const auto& s = stats[i];
        const auto op = solve_operating_point(detail::with_policy(sc.mac, pols[i]));
        std::optional<double> mean_delay;
        if (!s.delays_s.empty()) {
            double sum = 0;
            for (double d : s.delays_s) sum += d;
            mean_delay = sum / s.delays_s.size();
        }
        t.rows.push_back({to_string(pols[i]), seed, s.slots, s.elapsed_s, s.arrived_bits(),
                          s.delivered_bits(), s.dropped_bits(), s.backlog_bits(), s.throughput(),
                          s.collision_rate(), op.p_laa, detail::num_or_null(mean_delay)});
        out.runs.emplace_back(pols[i], s);
    }
    return out;
}

}  // namespace effcap::cli
