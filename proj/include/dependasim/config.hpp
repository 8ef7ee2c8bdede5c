#pragma once

// Run configuration: every tunable in one struct, read from and written to a flat
// `section.key=value` text format. Two named profiles provide the starting values.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/level1.hpp"
#include "dependasim/level2.hpp"
#include "dependasim/level3.hpp"
#include "dependasim/metrics.hpp"
#include "dependasim/workload.hpp"

namespace dependasim {

struct RunConfig {
    std::string profile = "paper";
    std::uint64_t seed = 1;
    SimTime duration = 24 * kHour;
    std::string burst_table;  // path to a burst table CSV; empty means none
    bool calibrate = false;   // build the burst table in-process before the run
    std::uint64_t calibrate_trials = 10'000;
    std::string trace;  // replay this trace instead of the synthetic generator

    WorkloadConfig workload;
    Level2Config level2;
    FlipRates lambdas;
    SimTime transient_duration = 5 * kMicrosecond;
    SimTime metrics_window = 15 * kMinute;
    CoverageUnit coverage_unit = CoverageUnit::Codeword;
    FileSizeDist file_sizes;

    // Level 2 config with the track count taken from the workload section.
    Level2Config level2_config() const {
        Level2Config c = level2;
        c.n_tracks = workload.n_tracks;
        return c;
    }

    void validate() const {
        if (duration <= 0) throw ConfigError("run.duration must be positive");
        if (metrics_window <= 0) throw ConfigError("metrics.window must be positive");
        if (calibrate_trials == 0) throw ConfigError("run.calibrate_trials must be positive");
        if (transient_duration <= 0) throw ConfigError("level3.transient_duration must be positive");
        for (auto loc : kTransferLocations) {
            const double l = lambdas.at(loc);
            if (!(l >= 0.0 && l <= level2.geometry.bits_per_symbol))
                throw ConfigError("level3.lambda_" + std::string(location_name(loc)) +
                                  " must be in [0, bits_per_symbol]");
        }
        workload.validate();
        level2_config().validate();
        file_sizes.validate();
    }
};

// ---- value codecs ----

namespace detail {

inline std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest form that reads back identically.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

inline double parse_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d))
        throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
    return d;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
    return out;
}

inline std::uint32_t parse_u32(std::string_view key, std::string_view v) {
    const auto x = parse_u64(key, v);
    if (x > 0xffffffffULL) throw ConfigError(std::string(key) + ": value too large");
    return static_cast<std::uint32_t>(x);
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

}  // namespace detail

// Durations: an integer with an optional unit (ns, us, ms, s, m, h); bare numbers are
// seconds. Fractions are accepted ("1.5h").
inline SimTime parse_duration(std::string_view text) {
    static const std::vector<std::pair<std::string_view, SimTime>> units = {
        {"ns", kNanosecond}, {"us", kMicrosecond}, {"ms", kMillisecond}, {"s", kSecond}, {"m", kMinute}, {"h", kHour}};
    std::string_view num = text;
    SimTime unit = kSecond;
    for (const auto& [suffix, u] : units) {
        if (text.size() > suffix.size() && text.ends_with(suffix)) {
            const std::string_view head = text.substr(0, text.size() - suffix.size());
            // "ms" also ends with "s"; only accept a suffix that leaves a number behind.
            if (!head.empty() && (std::isdigit(static_cast<unsigned char>(head.back())) || head.back() == '.')) {
                num = head;
                unit = u;
                break;
            }
        }
    }
    const double v = detail::parse_double("duration", num);
    if (v < 0) throw ConfigError("duration must be >= 0: '" + std::string(text) + "'");
    return static_cast<SimTime>(std::llround(v * static_cast<double>(unit)));
}

inline std::string format_duration(SimTime t) {
    static const std::vector<std::pair<const char*, SimTime>> units = {
        {"h", kHour}, {"m", kMinute}, {"s", kSecond}, {"ms", kMillisecond}, {"us", kMicrosecond}};
    if (t == 0) return "0s";
    for (const auto& [suffix, u] : units)
        if (t % u == 0) return std::to_string(t / u) + suffix;
    return std::to_string(t) + "ns";
}

// ---- key table ----

struct ConfigField {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

namespace detail {

template <typename T>
ConfigField dbl(std::string key, T RunConfig::*outer, double T::*inner) {
    return {key, [=](const RunConfig& c) { return fmt_exact(c.*outer.*inner); },
            [=](RunConfig& c, std::string_view v) { c.*outer.*inner = parse_double(key, v); }};
}

template <typename T>
ConfigField u32(std::string key, T RunConfig::*outer, std::uint32_t T::*inner) {
    return {key, [=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
            [=](RunConfig& c, std::string_view v) { c.*outer.*inner = parse_u32(key, v); }};
}

template <typename T>
ConfigField dur(std::string key, T RunConfig::*outer, SimTime T::*inner) {
    return {key, [=](const RunConfig& c) { return format_duration(c.*outer.*inner); },
            [=](RunConfig& c, std::string_view v) { c.*outer.*inner = parse_duration(v); }};
}

}  // namespace detail

inline const std::vector<ConfigField>& config_fields() {
    using namespace detail;
    using RC = RunConfig;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        f.push_back({"run.profile", [](const RC& c) { return c.profile; },
                     [](RC& c, std::string_view v) { c.profile = std::string(v); }});
        f.push_back({"run.seed", [](const RC& c) { return std::to_string(c.seed); },
                     [](RC& c, std::string_view v) { c.seed = parse_u64("run.seed", v); }});
        f.push_back({"run.duration", [](const RC& c) { return format_duration(c.duration); },
                     [](RC& c, std::string_view v) { c.duration = parse_duration(v); }});
        f.push_back({"run.burst_table", [](const RC& c) { return c.burst_table; },
                     [](RC& c, std::string_view v) { c.burst_table = std::string(v); }});
        f.push_back({"run.calibrate", [](const RC& c) { return std::string(c.calibrate ? "true" : "false"); },
                     [](RC& c, std::string_view v) { c.calibrate = parse_bool("run.calibrate", v); }});
        f.push_back({"run.calibrate_trials", [](const RC& c) { return std::to_string(c.calibrate_trials); },
                     [](RC& c, std::string_view v) { c.calibrate_trials = parse_u64("run.calibrate_trials", v); }});
        f.push_back({"run.trace", [](const RC& c) { return c.trace; },
                     [](RC& c, std::string_view v) { c.trace = std::string(v); }});

        f.push_back(u32("workload.n_tracks", &RC::workload, &WorkloadConfig::n_tracks));
        f.push_back(u32("workload.n_active", &RC::workload, &WorkloadConfig::n_active));
        f.push_back(dbl("workload.zipf_exponent", &RC::workload, &WorkloadConfig::zipf_exponent));
        f.push_back(dur("workload.mean_interarrival", &RC::workload, &WorkloadConfig::mean_interarrival));
        f.push_back({"workload.mix_read", [](const RC& c) { return fmt_exact(c.workload.mix.read); },
                     [](RC& c, std::string_view v) { c.workload.mix.read = parse_double("workload.mix_read", v); }});
        f.push_back({"workload.mix_fast_write", [](const RC& c) { return fmt_exact(c.workload.mix.fast_write); },
                     [](RC& c, std::string_view v) {
                         c.workload.mix.fast_write = parse_double("workload.mix_fast_write", v);
                     }});
        f.push_back({"workload.mix_write_through", [](const RC& c) { return fmt_exact(c.workload.mix.write_through); },
                     [](RC& c, std::string_view v) {
                         c.workload.mix.write_through = parse_double("workload.mix_write_through", v);
                     }});
        f.push_back({"workload.file_min_tracks", [](const RC& c) { return std::to_string(c.file_sizes.min_tracks); },
                     [](RC& c, std::string_view v) { c.file_sizes.min_tracks = parse_u32("workload.file_min_tracks", v); }});
        f.push_back({"workload.file_max_tracks", [](const RC& c) { return std::to_string(c.file_sizes.max_tracks); },
                     [](RC& c, std::string_view v) { c.file_sizes.max_tracks = parse_u32("workload.file_max_tracks", v); }});

        f.push_back({"geometry.symbols_per_track",
                     [](const RC& c) { return std::to_string(c.level2.geometry.symbols_per_record); },
                     [](RC& c, std::string_view v) {
                         c.level2.geometry.symbols_per_record = parse_u32("geometry.symbols_per_track", v);
                     }});
        f.push_back({"geometry.bits_per_symbol",
                     [](const RC& c) { return std::to_string(c.level2.geometry.bits_per_symbol); },
                     [](RC& c, std::string_view v) {
                         c.level2.geometry.bits_per_symbol = parse_u32("geometry.bits_per_symbol", v);
                     }});

        f.push_back({"cache.capacity_tracks", [](const RC& c) { return std::to_string(c.level2.cache.capacity); },
                     [](RC& c, std::string_view v) { c.level2.cache.capacity = parse_u32("cache.capacity_tracks", v); }});
        f.push_back({"cache.cards", [](const RC& c) { return std::to_string(c.level2.cache.cards); },
                     [](RC& c, std::string_view v) { c.level2.cache.cards = parse_u32("cache.cards", v); }});
        f.push_back({"cache.cci_chan", [](const RC& c) { return std::to_string(c.level2.cache.cci_chan); },
                     [](RC& c, std::string_view v) { c.level2.cache.cci_chan = parse_u32("cache.cci_chan", v); }});
        f.push_back({"cache.cci_mem", [](const RC& c) { return std::to_string(c.level2.cache.cci_mem); },
                     [](RC& c, std::string_view v) { c.level2.cache.cci_mem = parse_u32("cache.cci_mem", v); }});
        f.push_back({"cache.writeback_threshold", [](const RC& c) { return fmt_exact(c.level2.cache.writeback_threshold); },
                     [](RC& c, std::string_view v) {
                         c.level2.cache.writeback_threshold = parse_double("cache.writeback_threshold", v);
                     }});
        f.push_back({"cache.writeback_period", [](const RC& c) { return format_duration(c.level2.cache.writeback_period); },
                     [](RC& c, std::string_view v) { c.level2.cache.writeback_period = parse_duration(v); }});

        f.push_back({"array.n_data", [](const RC& c) { return std::to_string(c.level2.array.n_data); },
                     [](RC& c, std::string_view v) { c.level2.array.n_data = parse_u32("array.n_data", v); }});
        f.push_back({"array.reconstruct_time", [](const RC& c) { return format_duration(c.level2.array.reconstruct_time); },
                     [](RC& c, std::string_view v) { c.level2.array.reconstruct_time = parse_duration(v); }});

        auto fault = [&](const char* key, double FaultPlan::*m) {
            f.push_back({key, [m](const RC& c) { return fmt_exact(c.level2.faults.*m); },
                         [m, key](RC& c, std::string_view v) { c.level2.faults.*m = parse_double(key, v); }});
        };
        fault("faults.bus_per_h", &FaultPlan::bus_per_h);
        fault("faults.cci_per_h", &FaultPlan::cci_per_h);
        fault("faults.cache_memory_per_h", &FaultPlan::cache_memory_per_h);
        fault("faults.disk_per_h", &FaultPlan::disk_per_h);
        fault("faults.xfer_channel_per_h", &FaultPlan::xfer_channel_per_h);
        fault("faults.xfer_disk_per_h", &FaultPlan::xfer_disk_per_h);
        fault("faults.cache_component_per_h", &FaultPlan::cache_component_per_h);
        fault("faults.disk_permanent_per_h", &FaultPlan::disk_permanent_per_h);
        fault("faults.repair_mean_h", &FaultPlan::repair_mean_h);
        fault("faults.load_per_bit", &FaultPlan::load_per_bit);
        fault("faults.burst_mean_bits", &FaultPlan::burst_mean_bits);
        fault("faults.burst_sd_bits", &FaultPlan::burst_sd_bits);
        fault("faults.crc_escape", &FaultPlan::crc_escape);
        fault("faults.retry_success_p", &FaultPlan::retry_success_p);
        f.push_back({"faults.transfer_mode",
                     [](const RC& c) {
                         return std::string(c.level2.faults.transfer_mode == TransferFaultMode::Latch ? "latch" : "window");
                     },
                     [](RC& c, std::string_view v) {
                         if (v == "latch")
                             c.level2.faults.transfer_mode = TransferFaultMode::Latch;
                         else if (v == "window")
                             c.level2.faults.transfer_mode = TransferFaultMode::Window;
                         else
                             throw ConfigError("faults.transfer_mode: expected latch or window, got '" + std::string(v) + "'");
                     }});
        f.push_back({"faults.edac_on_write", [](const RC& c) { return std::string(c.level2.faults.edac_on_write ? "true" : "false"); },
                     [](RC& c, std::string_view v) { c.level2.faults.edac_on_write = parse_bool("faults.edac_on_write", v); }});
        f.push_back({"faults.nvm_injection", [](const RC& c) { return std::string(c.level2.faults.nvm_injection ? "true" : "false"); },
                     [](RC& c, std::string_view v) { c.level2.faults.nvm_injection = parse_bool("faults.nvm_injection", v); }});

        auto timing = [&](const char* key, SimTime StageTiming::*m) {
            f.push_back({key, [m](const RC& c) { return std::to_string(c.level2.timing.*m); },
                         [m, key](RC& c, std::string_view v) {
                             c.level2.timing.*m = static_cast<SimTime>(parse_u64(key, v));
                         }});
        };
        timing("level3.bus1_ns_per_symbol", &StageTiming::bus1_ns_per_symbol);
        timing("level3.bus2_ns_per_symbol", &StageTiming::bus2_ns_per_symbol);
        timing("level3.cci_mem_residency_ns", &StageTiming::cci_mem_residency_ns);
        timing("level3.cci_chan_residency_ns", &StageTiming::cci_chan_residency_ns);
        f.push_back({"level3.transient_duration", [](const RC& c) { return format_duration(c.transient_duration); },
                     [](RC& c, std::string_view v) { c.transient_duration = parse_duration(v); }});
        auto lambda = [&](const char* key, double FlipRates::*m) {
            f.push_back({key, [m](const RC& c) { return fmt_exact(c.lambdas.*m); },
                         [m, key](RC& c, std::string_view v) { c.lambdas.*m = parse_double(key, v); }});
        };
        lambda("level3.lambda_bus1", &FlipRates::bus1);
        lambda("level3.lambda_bus2", &FlipRates::bus2);
        lambda("level3.lambda_cci_mem", &FlipRates::cci_mem);
        lambda("level3.lambda_cci_chan", &FlipRates::cci_chan);

        f.push_back({"metrics.window", [](const RC& c) { return format_duration(c.metrics_window); },
                     [](RC& c, std::string_view v) { c.metrics_window = parse_duration(v); }});
        f.push_back({"metrics.coverage_unit",
                     [](const RC& c) { return std::string(c.coverage_unit == CoverageUnit::Codeword ? "codeword" : "check"); },
                     [](RC& c, std::string_view v) {
                         if (v == "codeword")
                             c.coverage_unit = CoverageUnit::Codeword;
                         else if (v == "check")
                             c.coverage_unit = CoverageUnit::Check;
                         else
                             throw ConfigError("metrics.coverage_unit: expected codeword or check, got '" + std::string(v) + "'");
                     }});
        return f;
    }();
    return fields;
}

// ---- profiles ----

inline RunConfig paper_profile() { return RunConfig{}; }

// A hundredth of the tracks and cache, one simulated hour. Stored-data and transfer
// fault rates are raised so that a single run exercises every mechanism often enough
// for the statistical checks.
inline RunConfig desk_profile() {
    RunConfig c;
    c.profile = "desk";
    c.duration = kHour;
    c.workload.n_tracks = 4'800;
    c.workload.n_active = 1'270;
    c.level2.cache.capacity = 240;
    auto& f = c.level2.faults;
    f.bus_per_h = 10'000;
    f.cci_per_h = 1'000;
    f.cache_memory_per_h = 10'000;
    f.disk_per_h = 1'000;
    f.cache_component_per_h = 1e-2;
    f.disk_permanent_per_h = 1e-4;
    f.load_per_bit = 1e-12;
    c.calibrate = true;
    c.calibrate_trials = 2'000;
    return c;
}

inline RunConfig profile_config(std::string_view name) {
    if (name == "paper") return paper_profile();
    if (name == "desk") return desk_profile();
    throw ConfigError("run.profile: unknown profile '" + std::string(name) + "' (expected paper or desk)");
}

// ---- text format ----

inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    for (const auto& f : config_fields()) {
        if (f.key == key) {
            f.set(c, value);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

// Reads `key=value` lines ('#' starts a comment). A run.profile line selects the base
// values; the remaining keys override them regardless of order.
inline RunConfig parse_config(std::istream& in, std::string_view base_profile = "paper") {
    std::vector<std::tuple<std::size_t, std::string, std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    std::string profile(base_profile);
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string_view body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        std::string key(detail::trim(body.substr(0, eq)));
        std::string value(detail::trim(body.substr(eq + 1)));
        if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' already set on line " +
                              std::to_string(it->second));
        if (key == "run.profile") profile = value;
        entries.emplace_back(lineno, std::move(key), std::move(value));
    }
    RunConfig c = profile_config(profile);
    for (const auto& [n, key, value] : entries) {
        try {
            apply_setting(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(n) + ": " + e.what());
        }
    }
    return c;
}

inline RunConfig parse_config(const std::string& text, std::string_view base_profile = "paper") {
    std::istringstream in(text);
    return parse_config(in, base_profile);
}

inline RunConfig load_config(const std::string& path, std::string_view base_profile = "paper") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, base_profile);
}

inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& f : config_fields()) out += f.key + "=" + f.get(c) + "\n";
    return out;
}

}  // namespace dependasim
