#pragma once

// Slotted simulator of N LAA and M Wi-Fi transmitters in one collision
// domain. Node 0 is the tagged LAA transmitter; it owns a FIFO fed by
// constant-rate arrivals (or is saturated). All other nodes are saturated.
//
// Each virtual slot is idle (sigma), a single transmission, or a collision.
// Every contending node that does not transmit decrements its counter once
// per virtual slot, so a busy period counts as one (long) backoff slot.
// Time is kept in integer picoseconds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "effcap/error.hpp"
#include "effcap/mac_model.hpp"

namespace effcap {

inline constexpr double kSaturated = std::numeric_limits<double>::infinity();

struct SimConfig {
    ContentionConfig cfg;
    std::int64_t horizon_slots = 1'000'000;
    std::uint64_t seed = 1;
    double tagged_arrival_rate = kSaturated;  // bits/s; kSaturated for an always-full queue
    double packet_size = 1000;                // bits
    double per_eps = 0;
    double block_seconds = 0;  // 0 picks the default of 2000 busy-slot lengths
    bool record_trace = false;

    double block_length() const {
        return block_seconds > 0 ? block_seconds
                                 : 2000.0 * std::max({cfg.t_f, cfg.t_s, cfg.t_c});
    }

    void validate() const {
        cfg.validate();
        require(horizon_slots >= 1, "sim.horizon_slots", "must be >= 1");
        require(packet_size > 0 && std::isfinite(packet_size), "sim.packet_size", "must be > 0");
        require(tagged_arrival_rate >= 0, "sim.tagged_arrival_rate", "must be >= 0");
        require(per_eps >= 0 && per_eps <= 1, "sim.per_eps", "must lie in [0, 1]");
        require(block_seconds >= 0, "sim.block_seconds", "must be >= 0");
    }
};

enum class PacketOutcome { Delivered, Dropped };

struct PacketRecord {
    std::int64_t packet_id = 0;
    double arrival_s = 0;
    double departure_s = 0;
    int attempts = 0;
    PacketOutcome outcome = PacketOutcome::Delivered;
};

struct SimStats {
    std::int64_t slots = 0;
    double elapsed_s = 0;
    double packet_size = 0;
    std::int64_t arrived_packets = 0;
    std::int64_t delivered_packets = 0;
    std::int64_t dropped_packets = 0;
    std::int64_t backlog_packets = 0;  // queued or in service at the horizon
    std::int64_t tagged_attempts = 0;
    std::int64_t tagged_collisions = 0;
    std::int64_t tagged_errors = 0;  // collision-free but erroneous transmissions
    std::vector<std::int64_t> node_attempts;
    std::vector<std::int64_t> node_collisions;
    std::vector<double> delays_s;  // delivered packets, arrival to end of transmission
    double block_seconds = 0;
    std::vector<double> block_bits;  // delivered bits per complete block
    std::vector<PacketRecord> trace;

    double arrived_bits() const { return arrived_packets * packet_size; }
    double delivered_bits() const { return delivered_packets * packet_size; }
    double dropped_bits() const { return dropped_packets * packet_size; }
    double backlog_bits() const { return backlog_packets * packet_size; }
    double throughput() const { return elapsed_s > 0 ? delivered_bits() / elapsed_s : 0.0; }
    double collision_rate() const {
        return tagged_attempts > 0 ? static_cast<double>(tagged_collisions) / tagged_attempts : 0.0;
    }
};

namespace detail {

inline constexpr double kTicksPerSecond = 1e12;

inline std::int64_t to_ticks(double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds * kTicksPerSecond));
}

inline double to_seconds(std::int64_t ticks) { return ticks / kTicksPerSecond; }

struct Contender {
    int w0 = 1;
    int max_stage = 0;
    int retry_limit = 1;
    CwPolicy policy = CwPolicy::VCW;
    bool active = true;
    int counter = 0;
    int stage = 0;
    int attempts = 0;  // attempts spent on the current packet
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    int below(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }
    double unit() { return (engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

}  // namespace detail

inline SimStats run_sim(const SimConfig& sc) {
    sc.validate();
    const auto& cfg = sc.cfg;
    const int n_nodes = cfg.n_laa + cfg.m_wifi;
    detail::Rng rng(sc.seed);

    std::vector<detail::Contender> nodes(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        auto& c = nodes[i];
        if (i < cfg.n_laa) {
            c.w0 = cfg.w0;
            c.max_stage = cfg.max_stage;
            c.retry_limit = cfg.retry_limit;
            c.policy = cfg.policy;
        } else {
            c.w0 = cfg.wifi_w0;
            c.max_stage = cfg.wifi_max_stage;
            c.retry_limit = cfg.wifi_retry_limit;
            c.policy = CwPolicy::VCW;
        }
    }
    auto draw = [&](detail::Contender& c) {
        c.counter = rng.below(stage_window(c.policy, c.w0, c.max_stage, c.stage));
    };
    auto restart = [&](detail::Contender& c) {
        c.stage = 0;
        c.attempts = 0;
        draw(c);
    };

    const std::int64_t sigma = detail::to_ticks(cfg.sigma);
    const std::int64_t t_s = detail::to_ticks(cfg.t_s);
    const std::int64_t t_c = detail::to_ticks(cfg.t_c);
    const std::int64_t t_f = detail::to_ticks(cfg.t_f);
    const std::int64_t block = std::max<std::int64_t>(1, detail::to_ticks(sc.block_length()));

    const bool saturated = std::isinf(sc.tagged_arrival_rate);
    const bool has_arrivals = !saturated && sc.tagged_arrival_rate > 0;
    const double interarrival = has_arrivals ? sc.packet_size / sc.tagged_arrival_rate : 0.0;

    SimStats st;
    st.packet_size = sc.packet_size;
    st.block_seconds = detail::to_seconds(block);
    st.node_attempts.assign(n_nodes, 0);
    st.node_collisions.assign(n_nodes, 0);
    std::vector<std::int64_t> block_packets;

    // tagged FIFO: arrival tick and id of each queued packet
    struct Queued {
        std::int64_t id;
        std::int64_t arrival;
    };
    std::deque<Queued> fifo;
    std::int64_t next_arrival_id = 0;
    auto arrival_tick = [&](std::int64_t k) {
        return static_cast<std::int64_t>(std::llround(k * interarrival * detail::kTicksPerSecond));
    };

    std::int64_t now = 0;
    auto enqueue_until = [&](std::int64_t t) {
        if (saturated) {
            if (fifo.empty()) {
                fifo.push_back({next_arrival_id++, t});
                ++st.arrived_packets;
            }
            return;
        }
        if (!has_arrivals) return;
        while (arrival_tick(next_arrival_id) <= t) {
            fifo.push_back({next_arrival_id, arrival_tick(next_arrival_id)});
            ++next_arrival_id;
            ++st.arrived_packets;
        }
    };

    for (int i = 0; i < n_nodes; ++i) restart(nodes[i]);
    auto& tagged = nodes[0];
    enqueue_until(0);
    tagged.active = !fifo.empty();

    auto finish_tagged_packet = [&](PacketOutcome outcome, std::int64_t end) {
        const auto pkt = fifo.front();
        fifo.pop_front();
        if (outcome == PacketOutcome::Delivered) {
            ++st.delivered_packets;
            st.delays_s.push_back(detail::to_seconds(end - pkt.arrival));
            // block b holds departures in (b * block, (b + 1) * block]
            const auto b = static_cast<std::size_t>((end - 1) / block);
            if (block_packets.size() <= b) block_packets.resize(b + 1, 0);
            ++block_packets[b];
        } else {
            ++st.dropped_packets;
        }
        if (sc.record_trace) {
            st.trace.push_back({pkt.id, detail::to_seconds(pkt.arrival), detail::to_seconds(end),
                                tagged.attempts, outcome});
        }
    };

    std::vector<int> tx;
    tx.reserve(n_nodes);
    for (std::int64_t slot = 0; slot < sc.horizon_slots; ++slot) {
        if (!tagged.active) {
            enqueue_until(now);
            if (!fifo.empty()) {
                tagged.active = true;
                restart(tagged);
            }
        }
        tx.clear();
        for (int i = 0; i < n_nodes; ++i) {
            if (nodes[i].active && nodes[i].counter == 0) tx.push_back(i);
        }

        std::int64_t duration = sigma;
        if (tx.size() == 1) {
            const int i = tx.front();
            auto& c = nodes[i];
            ++st.node_attempts[i];
            ++c.attempts;
            if (i == 0) {
                ++st.tagged_attempts;
                duration = t_f;
                const std::int64_t end = now + duration;
                if (sc.per_eps > 0 && rng.unit() < sc.per_eps) {
                    ++st.tagged_errors;
                    restart(c);  // packet stays at the head of the queue
                } else {
                    finish_tagged_packet(PacketOutcome::Delivered, end);
                    enqueue_until(end);
                    c.active = !fifo.empty();
                    if (c.active) restart(c);
                }
            } else {
                duration = t_s;
                restart(c);
            }
        } else if (tx.size() > 1) {
            duration = t_c;
            for (int i : tx) {
                auto& c = nodes[i];
                ++st.node_attempts[i];
                ++st.node_collisions[i];
                ++c.attempts;
                if (i == 0) {
                    ++st.tagged_attempts;
                    ++st.tagged_collisions;
                }
                if (c.attempts >= c.retry_limit) {
                    if (i == 0) {
                        finish_tagged_packet(PacketOutcome::Dropped, now + duration);
                        enqueue_until(now + duration);
                        c.active = !fifo.empty();
                        if (c.active) restart(c);
                    } else {
                        restart(c);
                    }
                } else {
                    ++c.stage;
                    draw(c);
                }
            }
        }
        // contenders that did not transmit count this slot down
        for (int i = 0; i < n_nodes; ++i) {
            auto& c = nodes[i];
            if (!c.active || std::find(tx.begin(), tx.end(), i) != tx.end()) continue;
            if (c.counter > 0) --c.counter;
        }
        now += duration;
        ++st.slots;
    }
    enqueue_until(now);

    st.elapsed_s = detail::to_seconds(now);
    st.backlog_packets = static_cast<std::int64_t>(fifo.size());
    const auto complete = static_cast<std::size_t>(now / block);
    block_packets.resize(complete, 0);
    st.block_bits.reserve(complete);
    for (auto n : block_packets) st.block_bits.push_back(n * sc.packet_size);
    return st;
}

struct Estimate {
    double value = 0;
    double std_error = 0;
};

// Block estimator of -(1/theta t) log E[exp(-theta S(t))] with a jackknife
// standard error.
inline Estimate estimate_effcap(const SimStats& stats, double theta) {
    require(theta > 0, "theta", "must be > 0");
    const auto n = stats.block_bits.size();
    if (n < 100) {
        throw ValidationError("sim.block_bits", "need at least 100 blocks, have " +
                                                    std::to_string(n));
    }
    const double t = stats.block_seconds;
    const double s_min = *std::min_element(stats.block_bits.begin(), stats.block_bits.end());
    // shifted terms exp(-theta (s_b - s_min)) lie in (0, 1]
    std::vector<double> terms(n);
    double sum = 0;
    for (std::size_t b = 0; b < n; ++b) {
        terms[b] = std::exp(-theta * (stats.block_bits[b] - s_min));
        sum += terms[b];
    }
    auto rate_of = [&](double mean_term) {
        return (s_min - std::log(mean_term) / theta) / t;
    };
    Estimate out;
    out.value = rate_of(sum / n);

    double jk_mean = 0;
    std::vector<double> loo(n);
    for (std::size_t b = 0; b < n; ++b) {
        loo[b] = rate_of((sum - terms[b]) / (n - 1));
        jk_mean += loo[b];
    }
    jk_mean /= n;
    double ss = 0;
    for (double v : loo) ss += (v - jk_mean) * (v - jk_mean);
    out.std_error = std::sqrt((n - 1.0) / n * ss);
    return out;
}

struct ProportionEstimate {
    double value = 0;
    double lower = 0;  // Wilson 95% interval
    double upper = 0;
};

inline ProportionEstimate wilson_interval(std::int64_t hits, std::int64_t n) {
    constexpr double z = 1.959963984540054;
    const double p = static_cast<double>(hits) / n;
    const double z2n = z * z / n;
    const double centre = (p + z2n / 2) / (1 + z2n);
    const double half = z * std::sqrt(p * (1 - p) / n + z2n / (4.0 * n)) / (1 + z2n);
    return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline ProportionEstimate estimate_delay_violation(const SimStats& stats, double d_max) {
    const auto n = static_cast<std::int64_t>(stats.delays_s.size());
    if (n < 1000) {
        throw ValidationError("sim.delays", "need at least 1000 delay samples, have " +
                                                std::to_string(n));
    }
    std::int64_t over = 0;
    for (double d : stats.delays_s) over += d > d_max ? 1 : 0;
    return wilson_interval(over, n);
}

inline void write_delay_trace_csv(const SimStats& stats, std::ostream& os) {
    os << "packet_id,arrival_s,departure_s,attempts,outcome\n";
    char buf[160];
    for (const auto& r : stats.trace) {
        std::snprintf(buf, sizeof buf, "%lld,%.12f,%.12f,%d,%s\n",
                      static_cast<long long>(r.packet_id), r.arrival_s, r.departure_s, r.attempts,
                      r.outcome == PacketOutcome::Delivered ? "delivered" : "dropped");
        os << buf;
    }
}

}  // namespace effcap
