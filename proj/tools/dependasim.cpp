// dependasim: run, calibrate, gen-trace and report subcommands.
//
// Exit codes: 0 success, 2 invalid input (bad config, missing file), 3 I/O failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dependasim/config.hpp"
#include "dependasim/report.hpp"
#include "dependasim/runner.hpp"
#include "dependasim/workload.hpp"

namespace fs = std::filesystem;
using namespace dependasim;

namespace {

constexpr int kExitUser = 2;
constexpr int kExitIo = 3;

struct CommonOptions {
    std::string config_path;
    std::string profile;
    std::optional<std::uint64_t> seed;
    std::string duration;
    std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "key=value configuration file");
    cmd->add_option("--profile", o.profile, "base profile")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--seed", o.seed, "global seed (overrides DEPENDASIM_SEED)");
    cmd->add_option("--set", o.settings, "override one key, e.g. --set faults.bus_per_h=50");
}

// Profile, then config file, then DEPENDASIM_SEED, then command-line flags.
RunConfig build_config(const CommonOptions& o) {
    const std::string base = o.profile.empty() ? "paper" : o.profile;
    RunConfig cfg = o.config_path.empty() ? profile_config(base) : load_config(o.config_path, base);
    if (const char* env = std::getenv("DEPENDASIM_SEED"); env && *env)
        cfg.seed = detail::parse_u64("DEPENDASIM_SEED", detail::trim(env));
    for (const auto& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        apply_setting(cfg, detail::trim(std::string_view(s).substr(0, eq)),
                      detail::trim(std::string_view(s).substr(eq + 1)));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.duration.empty()) cfg.duration = parse_duration(o.duration);
    cfg.validate();
    return cfg;
}

void print_summary_line(const nlohmann::ordered_json& s) {
    std::printf("requests %llu  success %.6f  detected-uncorrected %.6f  undetected %.6f  unavailable %.6f\n",
                static_cast<unsigned long long>(s.at("requests").get<std::uint64_t>()), s.at("p_success").get<double>(),
                s.at("p_detected_uncorrected").get<double>(), s.at("p_undetected").get<double>(),
                s.at("p_unavailable").get<double>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fault-injection simulator of a cache-based RAID storage controller"};
    app.require_subcommand(1);

    CommonOptions run_opt;
    std::string run_out = "out";
    std::uint32_t runs = 1;
    bool verbose = false, calibrate = false;
    std::string burst_table, trace;
    auto* run = app.add_subcommand("run", "simulate and write metrics files");
    add_common(run, run_opt);
    run->add_option("--duration", run_opt.duration, "simulated time, e.g. 1h or 90m");
    run->add_option("--out-dir", run_out, "output directory");
    run->add_option("--runs", runs, "independent runs with seeds seed, seed+1, ...")->check(CLI::PositiveNumber);
    run->add_flag("--verbose", verbose, "also write events.jsonl");
    run->add_flag("--calibrate", calibrate, "estimate the burst table before running");
    run->add_option("--burst-table", burst_table, "burst table CSV from `calibrate`");
    run->add_option("--trace", trace, "replay a trace CSV instead of the synthetic workload");

    CommonOptions cal_opt;
    std::string cal_out = "bursts.csv";
    std::optional<std::uint64_t> trials;
    auto* cal = app.add_subcommand("calibrate", "estimate transient burst-length pdfs");
    add_common(cal, cal_opt);
    cal->add_option("--out", cal_out, "burst table CSV to write");
    cal->add_option("--trials", trials, "trials per location (default 10000)")->check(CLI::PositiveNumber);

    CommonOptions gen_opt;
    std::string gen_out = "trace.csv";
    std::optional<std::uint64_t> gen_n;
    auto* gen = app.add_subcommand("gen-trace", "write a synthetic request trace");
    add_common(gen, gen_opt);
    gen->add_option("--n", gen_n, "number of requests");
    gen->add_option("--duration", gen_opt.duration, "generate requests up to this time instead");
    gen->add_option("--out", gen_out, "trace CSV to write");

    std::string report_dir = "out";
    auto* rep = app.add_subcommand("report", "summarise a metrics directory");
    rep->add_option("--out-dir,dir", report_dir, "directory written by `run`");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUser;
    }

    try {
        if (*run) {
            RunConfig cfg = build_config(run_opt);
            if (calibrate) cfg.calibrate = true;
            if (!burst_table.empty()) cfg.burst_table = burst_table;
            if (!trace.empty()) cfg.trace = trace;
            if (!cfg.burst_table.empty() && !fs::exists(cfg.burst_table))
                throw ConfigError("burst table not found: " + cfg.burst_table);
            if (runs == 1) {
                const auto s = run_and_export(cfg, run_out, verbose);
                print_summary_line(s);
            } else {
                const auto s = run_many(cfg, runs, run_out, verbose);
                print_summary_line(s);
            }
            std::printf("metrics written to %s\n", run_out.c_str());
        } else if (*cal) {
            const RunConfig cfg = build_config(cal_opt);
            std::vector<BurstSummary> summaries;
            const auto table = calibrate_burst_table(cfg.level2.timing, cfg.lambdas, cfg.level2.geometry,
                                                     trials.value_or(10'000), cfg.seed, &summaries,
                                                     cfg.transient_duration);
            std::ofstream out(cal_out, std::ios::binary);
            if (!out) throw IoError("cannot write " + cal_out);
            table.write_csv(out);
            if (!out.flush()) throw IoError("write failed for " + cal_out);
            for (const auto& s : summaries)
                std::printf("%-8s mean %8.1f bits  sd %8.1f  trials %llu\n", std::string(location_name(s.location)).c_str(),
                            s.mean, s.stddev, static_cast<unsigned long long>(s.samples));
        } else if (*gen) {
            const RunConfig cfg = build_config(gen_opt);
            if (!gen_n && gen_opt.duration.empty()) throw ConfigError("gen-trace needs --n or --duration");
            RngRegistry rngs(cfg.seed);
            SyntheticWorkload src(cfg.workload, rngs.fork("workload"));
            std::vector<TrackRequest> reqs;
            if (gen_n) {
                reqs.reserve(*gen_n);
                for (std::uint64_t i = 0; i < *gen_n; ++i) reqs.push_back(*src.next());
            } else {
                for (auto r = src.next(); r && r->arrival <= cfg.duration; r = src.next()) reqs.push_back(*r);
            }
            std::ofstream out(gen_out, std::ios::binary);
            if (!out) throw IoError("cannot write " + gen_out);
            write_trace(out, reqs);
            if (!out.flush()) throw IoError("write failed for " + gen_out);
            const auto st = compute_stats(reqs);
            std::printf("requests %llu  mix R %.4f FW %.4f WT %.4f  top-100 share %.4f  mean interarrival %.3f ms\n",
                        static_cast<unsigned long long>(st.total), st.read_fraction(), st.fast_write_fraction(),
                        st.write_through_fraction(), st.top_k_share(100), st.mean_interarrival_ms);
        } else if (*rep) {
            std::fputs(render_report(load_report(report_dir)).c_str(), stdout);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUser;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return 0;
}
