#pragma once

// Scenario files: one JSON document (comments allowed) with the sections
// mac, link, qos, sim, optimize and sweep. Unknown keys are rejected and
// every error names the offending field.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "effcap/admission.hpp"
#include "effcap/desim.hpp"
#include "effcap/effcap.hpp"
#include "effcap/error.hpp"
#include "effcap/mac_model.hpp"
#include "effcap/optimizers.hpp"

namespace effcap::cli {

using Json = nlohmann::json;

struct SimSection {
    std::int64_t horizon_slots = 1'000'000;
    std::uint64_t seed = 1;
    double tagged_arrival_rate = kSaturated;
    double block_seconds = 0;
    bool record_trace = false;
};

struct ReceiverSpec {
    double gain_h = 1e-12;
};

struct OptimizeSection {
    double p_total = 0.2;       // W
    double b_total = 5e6;       // Hz
    double noise_n0 = 3.98e-21; // W/Hz
    std::vector<ReceiverSpec> receivers;
    std::vector<double> theta_grid;
    // eee
    std::size_t eee_receiver = 0;
    double p_min = 1e-4;
    double p_max = 0.2;
    double circuit_power = 0;
};

struct SweepSection {
    std::vector<double> densities;  // transmitters per km^2
    double area_km2 = 1;
    double theta = 1e-4;
};

struct Scenario {
    std::string name = "scenario";
    ContentionConfig mac;
    LinkParams link;
    QosSpec qos;
    std::optional<double> region_eta;  // unset: per-point default
    std::vector<double> theta_grid;
    std::vector<Flow> flows;
    Flow candidate;
    SimSection sim;
    OptimizeSection optimize;
    SweepSection sweep;

    // One LAA link transmitter's view for n_laa = round(density * area).
    int laa_count(double density) const {
        const double n = std::round(density * sweep.area_km2);
        require(n >= 1, "sweep.densities", "density * area must round to at least 1 transmitter");
        require(n <= 100000, "sweep.densities", "density * area is unreasonably large");
        return static_cast<int>(n);
    }

    SimConfig sim_config(const ContentionConfig& cfg) const {
        SimConfig sc;
        sc.cfg = cfg;
        sc.horizon_slots = sim.horizon_slots;
        sc.seed = sim.seed;
        sc.tagged_arrival_rate = sim.tagged_arrival_rate;
        sc.packet_size = link.rate_r * cfg.t_f;  // one frame at rate R
        sc.per_eps = link.per_eps;
        sc.block_seconds = sim.block_seconds;
        sc.record_trace = sim.record_trace;
        return sc;
    }

    // Both budgets start from an equal split; the optimizer overrides one.
    std::vector<ReceiverLink> receivers(double theta) const {
        std::vector<ReceiverLink> out;
        const double k = static_cast<double>(optimize.receivers.size());
        for (const auto& r : optimize.receivers) {
            ReceiverLink l;
            l.gain_h = r.gain_h;
            l.noise_n0 = optimize.noise_n0;
            l.theta_k = theta;
            l.bandwidth_b = optimize.b_total / k;
            l.power_p = optimize.p_total / k;
            out.push_back(l);
        }
        return out;
    }
};

namespace detail {

// One JSON object with a fixed set of allowed keys.
class Section {
public:
    Section(const Json& j, std::string path, std::initializer_list<const char*> allowed)
        : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ValidationError(path_.empty() ? "scenario" : path_, "must be an object");
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!ok.count(it.key())) throw ValidationError(field(it.key()), "unknown key");
        }
    }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key) const { return j_.at(key); }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number()) throw ValidationError(field(key), "must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ValidationError(field(key), "must be finite");
        return x;
    }

    template <class Int>
    Int integer(const std::string& key, Int fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ValidationError(field(key), "must be an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
            throw ValidationError(field(key), "must be a non-negative integer");
        } else {
            return static_cast<Int>(v.get<std::int64_t>());
        }
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) throw ValidationError(field(key), "must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_string()) throw ValidationError(field(key), "must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        if (!has(key)) return {};
        const auto& v = raw(key);
        if (!v.is_array()) throw ValidationError(field(key), "must be an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                throw ValidationError(field(key) + "[" + std::to_string(i) + "]",
                                      "must be a number");
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

private:
    const Json& j_;
    std::string path_;
};

inline CwPolicy parse_policy(const std::string& s, const std::string& field) {
    if (s == "FCW" || s == "fcw") return CwPolicy::FCW;
    if (s == "VCW" || s == "vcw") return CwPolicy::VCW;
    throw ValidationError(field, "must be \"FCW\" or \"VCW\"");
}

inline void require_ascending_positive(const std::vector<double>& v, const std::string& field) {
    require(!v.empty(), field.c_str(), "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
        require(v[i] > 0 && std::isfinite(v[i]), field.c_str(), "values must be > 0");
        if (i > 0) require(v[i] > v[i - 1], field.c_str(), "must be strictly ascending");
    }
}

inline Flow parse_flow(const Json& j, const std::string& path, const QosSpec& defaults) {
    Section s(j, path, {"rate_demand", "d_max", "p_th", "eta"});
    Flow f;
    f.qos = defaults;
    f.rate_demand = s.number("rate_demand", 0);
    f.qos.d_max = s.number("d_max", defaults.d_max);
    f.qos.p_th = s.number("p_th", defaults.p_th);
    f.qos.eta = s.number("eta", defaults.eta);
    require(f.rate_demand >= 0, s.field("rate_demand").c_str(), "must be >= 0");
    return f;
}

}  // namespace detail

inline Scenario parse_scenario(const Json& doc) {
    using detail::Section;
    Scenario sc;
    Section top(doc, "", {"name", "mac", "link", "qos", "sim", "optimize", "sweep"});
    sc.name = top.string("name", sc.name);

    if (top.has("mac")) {
        Section s(top.raw("mac"), "mac",
                  {"n_laa", "m_wifi", "policy", "w0", "max_stage", "retry_limit", "sigma", "t_s", "t_c", "t_f", "wifi_w0", "wifi_max_stage", "wifi_retry_limit"});
        auto& m = sc.mac;
        m.n_laa = s.integer<int>("n_laa", m.n_laa);
        m.m_wifi = s.integer<int>("m_wifi", m.m_wifi);
        m.policy = detail::parse_policy(s.string("policy", to_string(m.policy)), "mac.policy");
        m.w0 = s.integer<int>("w0", m.w0);
        m.max_stage = s.integer<int>("max_stage", m.max_stage);
        m.retry_limit = s.integer<int>("retry_limit", m.retry_limit);
        m.sigma = s.number("sigma", m.sigma);
        m.t_f = s.number("t_f", m.t_f);
        // busy slots default to one frame plus one idle slot
        m.t_s = s.number("t_s", m.t_f + m.sigma);
        m.t_c = s.number("t_c", m.t_f + m.sigma);
        m.wifi_w0 = s.integer<int>("wifi_w0", m.wifi_w0);
        m.wifi_max_stage = s.integer<int>("wifi_max_stage", m.wifi_max_stage);
        m.wifi_retry_limit = s.integer<int>("wifi_retry_limit", m.wifi_retry_limit);
    }
    sc.mac.validate();

    if (top.has("link")) {
        Section s(top.raw("link"), "link",
                  {"rate_r", "per_eps"});
        sc.link.rate_r = s.number("rate_r", sc.link.rate_r);
        sc.link.per_eps = s.number("per_eps", sc.link.per_eps);
    }
    sc.link.validate();

    if (top.has("qos")) {
        Section s(top.raw("qos"), "qos",
                  {"theta", "d_max", "p_th", "eta", "region_eta", "theta_grid", "flows", "candidate"});
        sc.qos.theta = s.number("theta", sc.qos.theta);
        sc.qos.d_max = s.number("d_max", sc.qos.d_max);
        sc.qos.p_th = s.number("p_th", sc.qos.p_th);
        sc.qos.eta = s.number("eta", sc.qos.eta);
        if (s.has("region_eta")) sc.region_eta = s.number("region_eta", 1.0);
        sc.theta_grid = s.numbers("theta_grid");
        if (s.has("flows")) {
            const auto& arr = s.raw("flows");
            if (!arr.is_array()) throw ValidationError("qos.flows", "must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                sc.flows.push_back(
                    detail::parse_flow(arr[i], "qos.flows[" + std::to_string(i) + "]", sc.qos));
            }
        }
        sc.candidate.qos = sc.qos;
        if (s.has("candidate")) {
            sc.candidate = detail::parse_flow(s.raw("candidate"), "qos.candidate", sc.qos);
        }
    }
    sc.qos.validate();
    if (sc.region_eta) {
        require(*sc.region_eta > 0 && *sc.region_eta <= 1, "qos.region_eta",
                "must lie in (0, 1]");
    }
    if (sc.theta_grid.empty()) sc.theta_grid = {sc.qos.theta};
    detail::require_ascending_positive(sc.theta_grid, "qos.theta_grid");

    if (top.has("sim")) {
        Section s(top.raw("sim"), "sim",
                  {"horizon_slots", "seed", "tagged_arrival_rate", "block_seconds", "record_trace"});
        sc.sim.horizon_slots = s.integer<std::int64_t>("horizon_slots", sc.sim.horizon_slots);
        sc.sim.seed = s.integer<std::uint64_t>("seed", sc.sim.seed);
        if (s.has("tagged_arrival_rate")) {
            const auto& v = s.raw("tagged_arrival_rate");
            if (v.is_string() && v.get<std::string>() == "saturated") {
                sc.sim.tagged_arrival_rate = kSaturated;
            } else if (v.is_number()) {
                sc.sim.tagged_arrival_rate = v.get<double>();
            } else {
                throw ValidationError("sim.tagged_arrival_rate",
                                      "must be a number or \"saturated\"");
            }
        }
        sc.sim.block_seconds = s.number("block_seconds", sc.sim.block_seconds);
        sc.sim.record_trace = s.boolean("record_trace", sc.sim.record_trace);
    }
    sc.sim_config(sc.mac).validate();

    if (top.has("optimize")) {
        Section s(top.raw("optimize"), "optimize",
                  {"p_total", "b_total", "noise_n0", "gains", "theta_grid", "eee_receiver", "p_min", "p_max", "circuit_power"});
        auto& o = sc.optimize;
        o.p_total = s.number("p_total", o.p_total);
        o.b_total = s.number("b_total", o.b_total);
        o.noise_n0 = s.number("noise_n0", o.noise_n0);
        for (double g : s.numbers("gains")) o.receivers.push_back({g});
        o.theta_grid = s.numbers("theta_grid");
        o.eee_receiver = s.integer<std::size_t>("eee_receiver", o.eee_receiver);
        o.p_min = s.number("p_min", o.p_min);
        o.p_max = s.number("p_max", o.p_total);
        o.circuit_power = s.number("circuit_power", o.circuit_power);
    }
    {
        const auto& o = sc.optimize;
        require(o.p_total > 0, "optimize.p_total", "must be > 0");
        require(o.b_total > 0, "optimize.b_total", "must be > 0");
        require(o.noise_n0 > 0, "optimize.noise_n0", "must be > 0");
        for (std::size_t i = 0; i < o.receivers.size(); ++i) {
            require(o.receivers[i].gain_h > 0,
                    ("optimize.gains[" + std::to_string(i) + "]").c_str(), "must be > 0");
        }
        if (!o.theta_grid.empty()) {
            detail::require_ascending_positive(o.theta_grid, "optimize.theta_grid");
        }
        require(o.p_min > 0, "optimize.p_min", "must be > 0");
        require(o.p_max >= o.p_min, "optimize.p_max", "must be >= p_min");
        require(o.circuit_power >= 0, "optimize.circuit_power", "must be >= 0");
        if (!o.receivers.empty()) {
            require(o.eee_receiver < o.receivers.size(), "optimize.eee_receiver",
                    "must index a receiver");
        }
    }
    if (sc.optimize.theta_grid.empty()) sc.optimize.theta_grid = sc.theta_grid;

    if (top.has("sweep")) {
        Section s(top.raw("sweep"), "sweep",
                  {"densities", "area_km2", "theta"});
        sc.sweep.densities = s.numbers("densities");
        sc.sweep.area_km2 = s.number("area_km2", sc.sweep.area_km2);
        sc.sweep.theta = s.number("theta", sc.qos.theta);
    } else {
        sc.sweep.theta = sc.qos.theta;
    }
    require(sc.sweep.area_km2 > 0, "sweep.area_km2", "must be > 0");
    require(sc.sweep.theta > 0, "sweep.theta", "must be > 0");
    if (!sc.sweep.densities.empty()) {
        detail::require_ascending_positive(sc.sweep.densities, "sweep.densities");
        for (double d : sc.sweep.densities) sc.laa_count(d);
    }
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const Json::parse_error& e) {
        throw ValidationError("scenario", std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("--scenario", "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

}  // namespace effcap::cli
