// effcap: effective-capacity analysis, simulation and allocation from a
// scenario file.
//
// Exit codes: 0 success, 1 solver or runtime failure, 2 invalid input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "effcap/cli/commands.hpp"
#include "effcap/cli/scenario.hpp"
#include "effcap/error.hpp"

namespace fs = std::filesystem;
using namespace effcap;
using namespace effcap::cli;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kInvalid = 2;

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void emit(const Table& t, bool json, const std::string& out_dir) {
    std::string text;
    if (json) {
        text = to_json(t).dump(2) + "\n";
    } else {
        std::ostringstream os;
        write_csv(t, os);
        text = os.str();
    }
    std::cout << text;
    for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / (t.name + (json ? ".json" : ".csv")), text);
    if (!t.warnings.empty()) {
        std::string w;
        for (const auto& line : t.warnings) w += line + "\n";
        write_file(fs::path(out_dir) / (t.name + ".warnings.txt"), w);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Effective capacity of contention-based LAA/Wi-Fi links"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool json = false;
    std::string policy = "both";
    double rate = 0;
    unsigned threads = 0;

    const std::map<std::string, std::string> commands = {
        {"analyze", "Closed-form and spectral effective capacity at qos.theta"},
        {"sweep-theta", "Analytical and simulated C(theta) over qos.theta_grid"},
        {"sweep-density", "Total effective capacity over sweep.densities"},
        {"region", "Boundary of the (rate, delay bound) region"},
        {"power-opt", "Power allocation against water-filling and channel inversion"},
        {"bandwidth-opt", "Bandwidth allocation against optimal-rate and equal split"},
        {"eee", "Effective energy efficiency of one receiver"},
        {"admit", "Admission decision for qos.candidate"},
        {"simulate", "Run the simulator and summarize the tagged link"},
    };
    std::map<std::string, CLI::App*> subs;
    CLI::Option* rate_opt = nullptr;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
        sub->add_option("--out", out_dir, "Directory for result files");
        sub->add_option("--seed", seed, "Simulation seed (overrides sim.seed)");
        sub->add_flag("--json", json, "Print JSON instead of CSV");
        sub->add_option("--policy", policy, "Contention window policy")
            ->check(CLI::IsMember({"fcw", "vcw", "both"}));
        sub->add_option("--threads", threads, "Worker threads (0: all cores)");
        if (name == "admit") {
            rate_opt = sub->add_option("--rate", rate, "Candidate rate demand, bits/s")
                           ->check(CLI::NonNegativeNumber);
        }
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    Options opt;
    opt.policy = policy == "fcw"   ? PolicySel::FCW
                 : policy == "vcw" ? PolicySel::VCW
                                   : PolicySel::Both;
    opt.threads = threads;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed() && sub->count("--seed")) opt.seed = seed;
    }
    if (rate_opt && rate_opt->count()) opt.rate_demand = rate;

    try {
        const auto sc = load_scenario(scenario_path);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "analyze") {
            emit(cmd_analyze(sc, opt), json, out_dir);
        } else if (cmd == "sweep-theta") {
            emit(cmd_sweep_theta(sc, opt), json, out_dir);
        } else if (cmd == "sweep-density") {
            emit(cmd_sweep_density(sc, opt), json, out_dir);
        } else if (cmd == "region") {
            emit(cmd_region(sc, opt), json, out_dir);
        } else if (cmd == "power-opt") {
            emit(cmd_power_opt(sc, opt), json, out_dir);
        } else if (cmd == "bandwidth-opt") {
            emit(cmd_bandwidth_opt(sc, opt), json, out_dir);
        } else if (cmd == "eee") {
            emit(cmd_eee(sc, opt), json, out_dir);
        } else if (cmd == "admit") {
            emit(cmd_admit(sc, opt), json, out_dir);
        } else if (cmd == "simulate") {
            const auto r = cmd_simulate(sc, opt);
            emit(r.table, json, out_dir);
            if (sc.sim.record_trace && !out_dir.empty()) {
                for (const auto& [pol, stats] : r.runs) {
                    std::ofstream os(fs::path(out_dir) /
                                     (std::string("trace_") + to_string(pol) + ".csv"));
                    write_delay_trace_csv(stats, os);
                }
            }
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}
