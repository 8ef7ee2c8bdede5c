#pragma once

// Symbol-granularity model of one track moving through the controller interfaces and
// busses while transient faults are active. Its only product for the rest of the
// simulator is the burst table: per location, the pdf of the number of bit flips a
// track picks up given that a transient fault hit it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dependasim/codes.hpp"
#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"

namespace dependasim {

enum class TransferPath : std::uint8_t { HostToCache, CacheToHost, DiskToCache, CacheToDisk };

inline std::string_view path_name(TransferPath p) {
    switch (p) {
        case TransferPath::HostToCache: return "host->cache";
        case TransferPath::CacheToHost: return "cache->host";
        case TransferPath::DiskToCache: return "disk->cache";
        case TransferPath::CacheToDisk: return "cache->disk";
    }
    return "?";
}

// Locations a transfer crosses, in time order.
inline std::array<Location, 4> path_stages(TransferPath p) {
    switch (p) {
        case TransferPath::HostToCache:
        case TransferPath::DiskToCache:
            return {Location::CciChan, Location::Bus1, Location::CciMem, Location::Bus2};
        case TransferPath::CacheToHost:
        case TransferPath::CacheToDisk:
            return {Location::Bus2, Location::CciMem, Location::Bus1, Location::CciChan};
    }
    return {};
}

inline constexpr std::array<Location, 4> kTransferLocations = {Location::Bus1, Location::Bus2, Location::CciMem,
                                                               Location::CciChan};

inline bool is_bus(Location l) { return l == Location::Bus1 || l == Location::Bus2; }

struct StageTiming {
    SimTime bus1_ns_per_symbol = 10;
    SimTime bus2_ns_per_symbol = 10;
    SimTime cci_mem_residency_ns = 10'240;
    SimTime cci_chan_residency_ns = 10'240;

    bool operator==(const StageTiming&) const = default;

    void validate() const {
        if (bus1_ns_per_symbol <= 0 || bus2_ns_per_symbol <= 0 || cci_mem_residency_ns <= 0 ||
            cci_chan_residency_ns <= 0)
            throw ConfigError("level3 timings must be positive");
    }

    // Time the track occupies a location.
    SimTime stage_duration(Location l, const Geometry& g) const {
        switch (l) {
            case Location::Bus1: return bus1_ns_per_symbol * g.symbols_per_record;
            case Location::Bus2: return bus2_ns_per_symbol * g.symbols_per_record;
            case Location::CciMem: return cci_mem_residency_ns;
            case Location::CciChan: return cci_chan_residency_ns;
            default: return 0;
        }
    }

    SimTime ns_per_symbol(Location l) const {
        return l == Location::Bus1 ? bus1_ns_per_symbol : l == Location::Bus2 ? bus2_ns_per_symbol : 0;
    }
};

// Mean bit flips per exposed symbol while a transient is active, by location.
struct FlipRates {
    double bus1 = 0.2;
    double bus2 = 0.2;
    double cci_mem = 0.78;
    double cci_chan = 0.98;

    bool operator==(const FlipRates&) const = default;

    double at(Location l) const {
        switch (l) {
            case Location::Bus1: return bus1;
            case Location::Bus2: return bus2;
            case Location::CciMem: return cci_mem;
            case Location::CciChan: return cci_chan;
            default: return 0.0;
        }
    }
    double& at(Location l) {
        switch (l) {
            case Location::Bus1: return bus1;
            case Location::Bus2: return bus2;
            case Location::CciMem: return cci_mem;
            default: return cci_chan;
        }
    }
};

struct TransientFault {
    SimTime start = 0;  // relative to the start of the track transfer
    SimTime duration = 5 * kMicrosecond;
    Location location = Location::Bus1;
    double flips_per_symbol_mean = 0.2;
};

struct StageErrors {
    Location location;
    SymbolErrors errors;
};

// Replays one track transfer. Busses carry one symbol per cycle; an interface buffer
// holds the whole track for its residency time. Every symbol being handled at a
// faulty location while the transient is active picks up Poisson(lambda) flips.
inline std::vector<StageErrors> simulate_track_transfer(TransferPath path, std::span<const TransientFault> faults,
                                                        const StageTiming& timing, const Geometry& geom,
                                                        RngStream& rng) {
    std::vector<StageErrors> out;
    SimTime stage_start = 0;
    for (auto loc : path_stages(path)) {
        StageErrors st{loc, SymbolErrors(geom)};
        const SimTime dur = timing.stage_duration(loc, geom);
        for (const auto& f : faults) {
            if (f.location != loc || f.duration <= 0) continue;
            const SimTime f_end = f.start + f.duration;
            if (is_bus(loc)) {
                const SimTime cycle = timing.ns_per_symbol(loc);
                for (std::uint32_t s = 0; s < geom.symbols_per_record; ++s) {
                    const SimTime a = stage_start + s * cycle;
                    if (a < f_end && f.start < a + cycle)
                        st.errors.add(s, static_cast<std::uint32_t>(rng.poisson(f.flips_per_symbol_mean)));
                }
            } else if (stage_start < f_end && f.start < stage_start + dur) {
                for (std::uint32_t s = 0; s < geom.symbols_per_record; ++s)
                    st.errors.add(s, static_cast<std::uint32_t>(rng.poisson(f.flips_per_symbol_mean)));
            }
        }
        out.push_back(std::move(st));
        stage_start += dur;
    }
    return out;
}

// Symbols a single transient of `fault_duration` touches at `loc`, given that it falls
// inside the track's time at that location.
inline double expected_symbols_exposed(Location loc, const StageTiming& timing, const Geometry& geom,
                                       SimTime fault_duration = 5 * kMicrosecond) {
    if (is_bus(loc)) {
        const SimTime cycle = timing.ns_per_symbol(loc);
        const SimTime cycles = (fault_duration + cycle - 1) / cycle;
        return static_cast<double>(std::min<SimTime>(cycles, geom.symbols_per_record));
    }
    return static_cast<double>(geom.symbols_per_record);
}

inline double calibrate_lambda(Location loc, double target_mean_bits, const StageTiming& timing,
                               const Geometry& geom, SimTime fault_duration = 5 * kMicrosecond) {
    if (!(target_mean_bits > 0.0)) throw ConfigError("burst target mean must be positive");
    const double lambda = target_mean_bits / expected_symbols_exposed(loc, timing, geom, fault_duration);
    if (lambda > geom.bits_per_symbol)
        throw ConfigError("burst target " + std::to_string(target_mean_bits) + " unreachable at " +
                          std::string(location_name(loc)));
    return lambda;
}

struct BurstSummary {
    Location location = Location::Bus1;
    std::map<std::uint64_t, double> pdf;  // bits -> probability
    double mean = 0.0;
    double stddev = 0.0;
    std::uint64_t samples = 0;
    std::vector<std::uint64_t> raw;  // per-trial totals, in trial order
};

inline BurstSummary summarize_bursts(Location loc, std::vector<std::uint64_t> totals) {
    BurstSummary b;
    b.location = loc;
    b.samples = totals.size();
    if (totals.empty()) return b;
    std::map<std::uint64_t, std::uint64_t> counts;
    double sum = 0.0;
    for (auto t : totals) {
        ++counts[t];
        sum += static_cast<double>(t);
    }
    b.mean = sum / static_cast<double>(totals.size());
    double ss = 0.0;
    for (auto t : totals) ss += (static_cast<double>(t) - b.mean) * (static_cast<double>(t) - b.mean);
    b.stddev = totals.size() > 1 ? std::sqrt(ss / static_cast<double>(totals.size() - 1)) : 0.0;
    for (const auto& [bits, c] : counts) b.pdf[bits] = static_cast<double>(c) / static_cast<double>(totals.size());
    b.raw = std::move(totals);
    return b;
}

// Conditional burst-length pdf at `loc`: n_trials independent transfers, each hit by
// one transient placed uniformly inside the track's time at that location (bus faults
// start on a symbol-cycle boundary). Trial i draws only from substream i.
inline BurstSummary estimate_burst_pdf(Location loc, std::uint64_t n_trials, const StageTiming& timing,
                                       double lambda, const Geometry& geom, const RngStream& rng,
                                       SimTime fault_duration = 5 * kMicrosecond) {
    if (n_trials == 0) throw ConfigError("burst estimation needs at least one trial");
    const TransferPath path = TransferPath::HostToCache;
    SimTime stage_start = 0;
    for (auto l : path_stages(path)) {
        if (l == loc) break;
        stage_start += timing.stage_duration(l, geom);
    }
    const SimTime dur = timing.stage_duration(loc, geom);
    std::vector<std::uint64_t> totals;
    totals.reserve(n_trials);
    for (std::uint64_t i = 0; i < n_trials; ++i) {
        RngStream trial = rng.substream(i);
        TransientFault f;
        f.location = loc;
        f.duration = fault_duration;
        f.flips_per_symbol_mean = lambda;
        const SimTime slack = std::max<SimTime>(0, dur - fault_duration);
        if (is_bus(loc)) {
            const SimTime cycle = timing.ns_per_symbol(loc);
            f.start = stage_start + static_cast<SimTime>(trial.uniform_int(0, static_cast<std::uint64_t>(slack / cycle))) * cycle;
        } else {
            f.start = stage_start + static_cast<SimTime>(trial.uniform_int(0, static_cast<std::uint64_t>(slack)));
        }
        const auto stages = simulate_track_transfer(path, std::span(&f, 1), timing, geom, trial);
        std::uint64_t bits = 0;
        for (const auto& s : stages) bits += s.errors.total_bits();
        totals.push_back(bits);
    }
    return summarize_bursts(loc, std::move(totals));
}

// Per-location burst pdfs handed from the transfer model to the track-level model.
class BurstTable {
public:
    void set(Location loc, std::map<std::uint64_t, double> pdf) {
        auto& t = tables_[loc];
        t.bits.clear();
        t.cdf.clear();
        double acc = 0.0;
        for (const auto& [bits, p] : pdf) {
            if (p <= 0.0) continue;
            acc += p;
            t.bits.push_back(bits);
            t.cdf.push_back(acc);
            t.pdf.emplace_back(bits, p);
        }
        if (t.bits.empty()) throw ConfigError("burst pdf for " + std::string(location_name(loc)) + " is empty");
        if (std::abs(acc - 1.0) > 1e-6)
            throw ConfigError("burst pdf for " + std::string(location_name(loc)) + " sums to " + std::to_string(acc));
        for (auto& c : t.cdf) c /= acc;
    }

    bool has(Location loc) const { return tables_.count(loc) != 0; }

    std::uint64_t sample(Location loc, RngStream& rng) const {
        auto it = tables_.find(loc);
        if (it == tables_.end())
            throw ConfigError("no burst table for location " + std::string(location_name(loc)));
        const auto& t = it->second;
        const double u = rng.uniform();
        auto pos = std::upper_bound(t.cdf.begin(), t.cdf.end(), u) - t.cdf.begin();
        if (pos >= static_cast<std::ptrdiff_t>(t.bits.size())) pos = static_cast<std::ptrdiff_t>(t.bits.size()) - 1;
        return t.bits[static_cast<std::size_t>(pos)];
    }

    double mean(Location loc) const {
        double m = 0.0;
        for (const auto& [bits, p] : tables_.at(loc).pdf) m += static_cast<double>(bits) * p;
        return m;
    }

    void write_csv(std::ostream& out) const {
        out << "location,bits,probability\n";
        for (const auto& [loc, t] : tables_)
            for (const auto& [bits, p] : t.pdf)
                out << location_name(loc) << ',' << bits << ',' << std::setprecision(17) << p << '\n';
    }

    static BurstTable read_csv(std::istream& in) {
        std::map<Location, std::map<std::uint64_t, double>> pdfs;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (lineno == 1 && line == "location,bits,probability") continue;
            std::stringstream ss(line);
            std::string loc_s, bits_s, p_s;
            if (!std::getline(ss, loc_s, ',') || !std::getline(ss, bits_s, ',') || !std::getline(ss, p_s))
                throw FormatError("expected location,bits,probability", lineno);
            Location loc;
            try {
                loc = parse_location(loc_s);
            } catch (const ConfigError& e) {
                throw FormatError(e.what(), lineno);
            }
            std::uint64_t bits = 0;
            double p = 0.0;
            try {
                std::size_t used = 0;
                bits = std::stoull(bits_s, &used);
                if (used != bits_s.size()) throw std::invalid_argument("bits");
                p = std::stod(p_s, &used);
                if (used != p_s.size()) throw std::invalid_argument("p");
            } catch (const std::exception&) {
                throw FormatError("bad number", lineno);
            }
            if (p < 0.0 || p > 1.0) throw FormatError("probability out of [0,1]", lineno);
            pdfs[loc][bits] += p;
        }
        BurstTable t;
        for (auto& [loc, pdf] : pdfs) t.set(loc, std::move(pdf));
        return t;
    }

    static BurstTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open burst table: " + path);
        return read_csv(in);
    }

private:
    struct Table {
        std::vector<std::uint64_t> bits;
        std::vector<double> cdf;
        std::vector<std::pair<std::uint64_t, double>> pdf;
    };
    std::map<Location, Table> tables_;
};

// Runs the burst estimate for all four transfer locations.
inline BurstTable calibrate_burst_table(const StageTiming& timing, const FlipRates& lambdas, const Geometry& geom,
                                        std::uint64_t n_trials, std::uint64_t seed,
                                        std::vector<BurstSummary>* summaries = nullptr,
                                        SimTime fault_duration = 5 * kMicrosecond) {
    RngRegistry reg(seed);
    BurstTable table;
    for (auto loc : kTransferLocations) {
        const auto rng = reg.fork("level3." + std::string(location_name(loc)));
        auto s = estimate_burst_pdf(loc, n_trials, timing, lambdas.at(loc), geom, rng, fault_duration);
        table.set(loc, s.pdf);
        if (summaries) summaries->push_back(std::move(s));
    }
    return table;
}

}  // namespace dependasim
