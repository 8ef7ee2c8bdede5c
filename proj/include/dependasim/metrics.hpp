#pragma once

// Error records, coverage counters, latency histograms and windowed series, plus the
// CSV/JSON export of a finished run.

#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dependasim/codes.hpp"
#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/workload.hpp"

namespace dependasim {

enum class Outcome : std::uint8_t { Success, DetectedUncorrected, Undetected, Unavailable };

inline constexpr std::array<Outcome, 4> kAllOutcomes = {Outcome::Success, Outcome::DetectedUncorrected,
                                                        Outcome::Undetected, Outcome::Unavailable};

inline std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Success: return "SUCCESS";
        case Outcome::DetectedUncorrected: return "DETECTED_UNCORRECTED";
        case Outcome::Undetected: return "UNDETECTED";
        case Outcome::Unavailable: return "UNAVAILABLE";
    }
    return "?";
}

// Larger is worse.
inline int severity(Outcome o) {
    switch (o) {
        case Outcome::Success: return 0;
        case Outcome::DetectedUncorrected: return 1;
        case Outcome::Unavailable: return 2;
        case Outcome::Undetected: return 3;
    }
    return 0;
}

// Five-code classification of where an error came from, and the finer six-code one
// that splits the controller interfaces by side.
enum class Origin : std::uint8_t { CCI, CM, D, B1, B2 };
enum class OriginDetail : std::uint8_t { CCI_CHAN, CCI_MEM, CM, D, B1, B2 };

inline constexpr std::array<Origin, 5> kAllOrigins = {Origin::CCI, Origin::CM, Origin::D, Origin::B1, Origin::B2};

inline Origin origin_of(Location l) {
    switch (l) {
        case Location::XferChannelToCache:
        case Location::CciChan:
        case Location::CciMem: return Origin::CCI;
        case Location::Bus1: return Origin::B1;
        case Location::Bus2: return Origin::B2;
        case Location::CacheMemory: return Origin::CM;
        case Location::XferCacheToDisk:
        case Location::Disk: return Origin::D;
    }
    return Origin::CCI;
}

inline OriginDetail origin_detail_of(Location l) {
    switch (l) {
        case Location::XferChannelToCache:
        case Location::CciChan: return OriginDetail::CCI_CHAN;
        case Location::CciMem: return OriginDetail::CCI_MEM;
        case Location::Bus1: return OriginDetail::B1;
        case Location::Bus2: return OriginDetail::B2;
        case Location::CacheMemory: return OriginDetail::CM;
        case Location::XferCacheToDisk:
        case Location::Disk: return OriginDetail::D;
    }
    return OriginDetail::CCI_CHAN;
}

inline std::string_view origin_name(Origin o) {
    static constexpr std::array<std::string_view, 5> n = {"CCI", "CM", "D", "B1", "B2"};
    return n[static_cast<std::size_t>(o)];
}

inline std::string_view origin_detail_name(OriginDetail o) {
    static constexpr std::array<std::string_view, 6> n = {"CCI_CHAN", "CCI_MEM", "CM", "D", "B1", "B2"};
    return n[static_cast<std::size_t>(o)];
}

enum class Disposition : std::uint8_t { Pending, Corrected, Detected, Overwritten, EscapedToHost };

inline std::string_view disposition_name(Disposition d) {
    switch (d) {
        case Disposition::Pending: return "PENDING";
        case Disposition::Corrected: return "CORRECTED";
        case Disposition::Detected: return "DETECTED";
        case Disposition::Overwritten: return "OVERWRITTEN";
        case Disposition::EscapedToHost: return "ESCAPED_TO_HOST";
    }
    return "?";
}

using RecordId = std::uint64_t;

struct ErrorRecord {
    RecordId id = 0;
    Location origin = Location::CacheMemory;
    SimTime injected_at = 0;
    std::uint32_t bits = 0;
    std::uint32_t symbols = 0;
    // A copy made when a replica carrying the error was written elsewhere (destage,
    // stage, NVM copy). Copies are tracked to the end but kept out of latency stats.
    bool propagated = false;
    Disposition disposition = Disposition::Pending;
    std::optional<Mechanism> mechanism;
    SimTime resolved_at = -1;
    SimTime latency = -1;
};

enum class CoverageUnit : std::uint8_t { Codeword, Check };

struct CoverageCounts {
    std::uint64_t checked = 0;
    std::uint64_t detected = 0;
    std::uint64_t corrected = 0;
    std::uint64_t missed = 0;

    double coverage() const {
        return checked ? static_cast<double>(detected) / static_cast<double>(checked)
                       : std::numeric_limits<double>::quiet_NaN();
    }
    CoverageCounts& operator+=(const CoverageCounts& o) {
        checked += o.checked;
        detected += o.detected;
        corrected += o.corrected;
        missed += o.missed;
        return *this;
    }
};

using Histogram = std::map<std::uint64_t, std::uint64_t>;  // 0.1 ms bucket -> count

inline constexpr SimTime kLatencyBucket = 100 * kMicrosecond;

struct WindowSample {
    double cache_fraction = 0.0;
    double disk_fraction = 0.0;
    double dirty_fraction = 0.0;
    std::uint64_t reconstructions = 0;
    bool taken = false;
};

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline nlohmann::ordered_json json_number(double v) {
    if (std::isnan(v) || std::isinf(v)) return nullptr;
    return v;
}

}  // namespace detail

class Metrics {
public:
    struct Options {
        SimTime window = 15 * kMinute;
        SimTime duration = kHour;
        CoverageUnit unit = CoverageUnit::Codeword;
    };

    explicit Metrics(Options opt) : opt_(opt) {
        if (opt_.window <= 0 || opt_.duration <= 0) throw ConfigError("metrics window and duration must be positive");
        const auto n = static_cast<std::size_t>((opt_.duration + opt_.window - 1) / opt_.window);
        coverage_.assign(n, {});
        windows_.assign(n, {});
    }

    const Options& options() const { return opt_; }
    std::size_t n_windows() const { return windows_.size(); }

    std::size_t window_of(SimTime t) const {
        const auto w = static_cast<std::size_t>(std::max<SimTime>(t, 0) / opt_.window);
        return std::min(w, windows_.size() - 1);
    }

    void set_event_log(std::ostream* log) { log_ = log; }

    // ---- coverage ----

    // `o` must be computed over in-scope errors only; clean checks do not count.
    void on_check(SimTime t, Mechanism m, const CheckOutcome& o) {
        if (o.result == CheckResult::Clean) return;
        CoverageCounts c;
        const bool per_symbol = opt_.unit == CoverageUnit::Codeword && (m == Mechanism::Parity || m == Mechanism::Edac);
        if (per_symbol) {
            c.checked = o.erroneous_symbols;
            c.corrected = o.corrected_symbols;
            c.detected = o.detected_symbols + o.corrected_symbols;
            c.missed = o.missed_symbols;
        } else {
            c.checked = 1;
            c.corrected = o.result == CheckResult::Corrected ? 1 : 0;
            c.detected = o.result == CheckResult::Missed ? 0 : 1;
            c.missed = o.result == CheckResult::Missed ? 1 : 0;
        }
        coverage_[window_of(t)][static_cast<std::size_t>(m)] += c;
        // EDAC symbols are always tallied per symbol for the correction share.
        if (m == Mechanism::Edac) {
            edac_symbols_corrected_ += o.corrected_symbols;
            edac_symbols_uncorrectable_ += o.detected_symbols;
        }
    }

    CoverageCounts coverage_total(Mechanism m) const {
        CoverageCounts c;
        for (const auto& w : coverage_) c += w[static_cast<std::size_t>(m)];
        return c;
    }
    const CoverageCounts& coverage_window(std::size_t w, Mechanism m) const {
        return coverage_.at(w)[static_cast<std::size_t>(m)];
    }

    // corrected / (corrected + detected-uncorrectable), per symbol.
    double edac_correction_share() const {
        const auto d = edac_symbols_corrected_ + edac_symbols_uncorrectable_;
        return d ? static_cast<double>(edac_symbols_corrected_) / static_cast<double>(d)
                 : std::numeric_limits<double>::quiet_NaN();
    }

    void on_crc_escape(Mechanism m) { ++(m == Mechanism::PsCrc ? ps_escapes_ : fe_escapes_); }
    std::uint64_t crc_escapes(Mechanism m) const { return m == Mechanism::PsCrc ? ps_escapes_ : fe_escapes_; }

    // ---- records ----

    RecordId inject(SimTime t, Location origin, const SymbolErrors& footprint, bool propagated) {
        ErrorRecord r;
        r.id = records_.size();
        r.origin = origin;
        r.injected_at = t;
        r.bits = static_cast<std::uint32_t>(footprint.total_bits());
        r.symbols = static_cast<std::uint32_t>(footprint.symbols_in_error());
        r.propagated = propagated;
        records_.push_back(r);
        ++pending_;
        if (log_) {
            nlohmann::ordered_json j;
            j["t_ns"] = t;
            j["event"] = "inject";
            j["record"] = r.id;
            j["origin"] = location_name(origin);
            j["bits"] = r.bits;
            j["propagated"] = propagated;
            *log_ << j.dump() << '\n';
        }
        return r.id;
    }

    // `latency_start` is when the latency clock for this record started.
    void resolve(RecordId id, Disposition d, std::optional<Mechanism> m, SimTime t, SimTime latency_start) {
        auto& r = records_.at(id);
        if (r.disposition != Disposition::Pending)
            throw std::logic_error("error record " + std::to_string(id) + " resolved twice");
        if (d == Disposition::Pending) throw std::logic_error("cannot resolve to PENDING");
        r.disposition = d;
        r.mechanism = m;
        r.resolved_at = t;
        r.latency = std::max<SimTime>(0, t - latency_start);
        --pending_;
        if (!r.propagated) {
            const std::uint64_t bucket = static_cast<std::uint64_t>(r.latency / kLatencyBucket);
            ++latency_[hist_key(Origin(origin_of(r.origin)))][bucket];
            ++latency_["ALL"][bucket];
            const auto detail = origin_detail_of(r.origin);
            if (detail == OriginDetail::CCI_CHAN || detail == OriginDetail::CCI_MEM)
                ++latency_[std::string(origin_detail_name(detail))][bucket];
            ++latency_by_cause_[{std::string(origin_name(origin_of(r.origin))), cause_name(d, m)}][bucket];
        }
        if (log_) {
            nlohmann::ordered_json j;
            j["t_ns"] = t;
            j["event"] = "resolve";
            j["record"] = id;
            j["origin"] = location_name(r.origin);
            j["disposition"] = disposition_name(d);
            j["mechanism"] = m ? nlohmann::ordered_json(mechanism_name(*m)) : nlohmann::ordered_json(nullptr);
            j["latency_ns"] = r.latency;
            *log_ << j.dump() << '\n';
        }
    }

    const ErrorRecord& record(RecordId id) const { return records_.at(id); }
    const std::vector<ErrorRecord>& records() const { return records_; }
    std::uint64_t pending() const { return pending_; }

    // Histogram keys: ALL, CCI, CM, D, B1, B2, CCI_CHAN, CCI_MEM.
    const Histogram& latency(const std::string& key) const {
        static const Histogram empty;
        auto it = latency_.find(key);
        return it == latency_.end() ? empty : it->second;
    }
    // Per origin and resolving cause (parity, edac, fe_crc, ps_crc, overwritten, escaped).
    const Histogram& latency_by_cause(const std::string& origin, const std::string& cause) const {
        static const Histogram empty;
        auto it = latency_by_cause_.find({origin, cause});
        return it == latency_by_cause_.end() ? empty : it->second;
    }

    // ---- outcomes and events ----

    void on_outcome(SimTime t, Op op, Outcome o, TrackId track) {
        ++outcomes_[static_cast<std::size_t>(o)];
        ++ops_[static_cast<std::size_t>(op)];
        if (log_ && o != Outcome::Success) {
            nlohmann::ordered_json j;
            j["t_ns"] = t;
            j["event"] = "outcome";
            j["track"] = track;
            j["op"] = op_code(op);
            j["outcome"] = outcome_name(o);
            *log_ << j.dump() << '\n';
        }
    }

    std::uint64_t outcomes(Outcome o) const { return outcomes_[static_cast<std::size_t>(o)]; }
    std::uint64_t requests() const {
        std::uint64_t n = 0;
        for (auto c : outcomes_) n += c;
        return n;
    }

    void on_reconstruction(SimTime t, std::uint64_t tracks) {
        windows_[window_of(t)].reconstructions += tracks;
        reconstructions_ += tracks;
    }
    std::uint64_t reconstructions() const { return reconstructions_; }

    void on_data_loss(SimTime t) {
        if (!first_data_loss_) first_data_loss_ = t;
        ++data_loss_events_;
    }
    std::uint64_t data_loss_events() const { return data_loss_events_; }
    std::optional<SimTime> first_data_loss() const { return first_data_loss_; }

    void on_unavailable(SimTime from, SimTime to) {
        if (to > from) unavailable_time_ += to - from;
    }
    SimTime unavailable_time() const { return unavailable_time_; }

    // ---- windowed series ----

    void snapshot(std::size_t window, double cache_fraction, double disk_fraction, double dirty_fraction) {
        auto& w = windows_.at(window);
        w.cache_fraction = cache_fraction;
        w.disk_fraction = disk_fraction;
        w.dirty_fraction = dirty_fraction;
        w.taken = true;
    }
    const std::vector<WindowSample>& windows() const { return windows_; }

    // ---- export ----

    void check_conservation() const {
        std::uint64_t resolved = 0, pending = 0;
        for (const auto& r : records_) (r.disposition == Disposition::Pending ? pending : resolved)++;
        if (resolved + pending != records_.size() || pending != pending_)
            throw std::logic_error("error-record conservation violated");
    }

    nlohmann::ordered_json summary(const nlohmann::ordered_json& meta) const {
        check_conservation();
        nlohmann::ordered_json j = meta;
        const auto n = requests();
        j["requests"] = n;
        auto& oc = j["outcomes"];
        for (auto o : kAllOutcomes) oc[std::string(outcome_name(o))] = outcomes(o);
        auto p = [&](Outcome o) {
            if (n == 0) return o == Outcome::Success ? 1.0 : 0.0;
            return static_cast<double>(outcomes(o)) / static_cast<double>(n);
        };
        j["p_success"] = p(Outcome::Success);
        j["p_detected_uncorrected"] = p(Outcome::DetectedUncorrected);
        j["p_undetected"] = p(Outcome::Undetected);
        j["p_unavailable"] = p(Outcome::Unavailable);
        j["ops"] = {{"R", ops_[0]}, {"FW", ops_[1]}, {"WT", ops_[2]}};

        std::array<std::uint64_t, 5> disp{};
        std::uint64_t primary = 0;
        std::map<std::string, std::uint64_t> by_origin;
        for (const auto& r : records_) {
            ++disp[static_cast<std::size_t>(r.disposition)];
            if (!r.propagated) {
                ++primary;
                ++by_origin[std::string(location_name(r.origin))];
            }
        }
        auto& rec = j["records"];
        rec["total"] = records_.size();
        rec["primary"] = primary;
        rec["propagated"] = records_.size() - primary;
        for (auto d : {Disposition::Pending, Disposition::Corrected, Disposition::Detected, Disposition::Overwritten,
                       Disposition::EscapedToHost})
            rec[std::string(disposition_name(d))] = disp[static_cast<std::size_t>(d)];
        auto& inj = j["injected_by_location"];
        inj = nlohmann::ordered_json::object();
        for (auto loc : kAllLocations) {
            auto it = by_origin.find(std::string(location_name(loc)));
            inj[std::string(location_name(loc))] = it == by_origin.end() ? 0 : it->second;
        }

        auto& cov = j["coverage"];
        cov["unit"] = opt_.unit == CoverageUnit::Codeword ? "codeword" : "check";
        for (auto m : kAllMechanisms) {
            const auto c = coverage_total(m);
            cov[std::string(mechanism_name(m))] = {{"checked", c.checked},
                                                   {"detected", c.detected},
                                                   {"corrected", c.corrected},
                                                   {"missed", c.missed},
                                                   {"coverage", detail::json_number(c.coverage())}};
        }
        j["edac_correction_share"] = detail::json_number(edac_correction_share());
        j["crc_escapes"] = {{"fe_crc", fe_escapes_}, {"ps_crc", ps_escapes_}};
        j["reconstructions"] = reconstructions_;
        j["mean_reconstruction_rate_per_ms"] =
            static_cast<double>(reconstructions_) / to_ms(opt_.duration);
        j["data_loss_events"] = data_loss_events_;
        j["time_to_first_data_loss_h"] =
            first_data_loss_ ? nlohmann::ordered_json(to_hours(*first_data_loss_)) : nlohmann::ordered_json(nullptr);
        j["availability_time"] = 1.0 - static_cast<double>(unavailable_time_) / static_cast<double>(opt_.duration);
        j["availability_requests"] = 1.0 - p(Outcome::Unavailable);
        j["windows"] = windows_.size();
        return j;
    }

    void export_all(const std::filesystem::path& dir, const nlohmann::ordered_json& meta) const {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

        write_file(dir / "coverage.csv", [&](std::ostream& o) { write_coverage_csv(o); });
        write_file(dir / "latency_hist.csv", [&](std::ostream& o) { write_latency_csv(o); });
        write_file(dir / "latency_by_cause.csv", [&](std::ostream& o) { write_latency_cause_csv(o); });
        write_file(dir / "faulty_fraction.csv", [&](std::ostream& o) { write_faulty_csv(o); });
        write_file(dir / "reconstruction.csv", [&](std::ostream& o) { write_reconstruction_csv(o); });
        write_file(dir / "summary.json", [&](std::ostream& o) { o << summary(meta).dump(2) << '\n'; });
    }

    void write_coverage_csv(std::ostream& o) const {
        o << "window,mechanism,checked,detected,corrected,missed,coverage\n";
        auto row = [&](const std::string& w, Mechanism m, const CoverageCounts& c) {
            o << w << ',' << mechanism_name(m) << ',' << c.checked << ',' << c.detected << ',' << c.corrected << ','
              << c.missed << ',' << detail::fmt_double(c.coverage()) << '\n';
        };
        for (std::size_t w = 0; w < coverage_.size(); ++w)
            for (auto m : kAllMechanisms) row(std::to_string(w), m, coverage_[w][static_cast<std::size_t>(m)]);
        for (auto m : kAllMechanisms) row("cumulative", m, coverage_total(m));
    }

    static const std::vector<std::string>& histogram_keys() {
        static const std::vector<std::string> keys = {"ALL", "CCI", "CM", "D", "B1", "B2", "CCI_CHAN", "CCI_MEM"};
        return keys;
    }

    void write_latency_csv(std::ostream& o) const {
        o << "origin,bucket_0p1ms,count\n";
        for (const auto& k : histogram_keys()) {
            auto it = latency_.find(k);
            if (it == latency_.end()) continue;
            for (const auto& [b, c] : it->second) o << k << ',' << b << ',' << c << '\n';
        }
    }

    void write_latency_cause_csv(std::ostream& o) const {
        o << "origin,cause,bucket_0p1ms,count\n";
        for (const auto& [key, h] : latency_by_cause_)
            for (const auto& [b, c] : h) o << key.first << ',' << key.second << ',' << b << ',' << c << '\n';
    }

    void write_faulty_csv(std::ostream& o) const {
        o << "window,cache_fraction,disk_fraction,dirty_fraction\n";
        for (std::size_t w = 0; w < windows_.size(); ++w)
            o << w << ',' << detail::fmt_double(windows_[w].cache_fraction) << ','
              << detail::fmt_double(windows_[w].disk_fraction) << ',' << detail::fmt_double(windows_[w].dirty_fraction)
              << '\n';
    }

    void write_reconstruction_csv(std::ostream& o) const {
        o << "window,count,rate_per_ms\n";
        for (std::size_t w = 0; w < windows_.size(); ++w) {
            const SimTime len = std::min(opt_.window, opt_.duration - static_cast<SimTime>(w) * opt_.window);
            o << w << ',' << windows_[w].reconstructions << ','
              << detail::fmt_double(static_cast<double>(windows_[w].reconstructions) / to_ms(len)) << '\n';
        }
    }

    static std::string cause_name(Disposition d, std::optional<Mechanism> m) {
        switch (d) {
            case Disposition::Corrected:
            case Disposition::Detected: return m ? std::string(mechanism_name(*m)) : "unknown";
            case Disposition::Overwritten: return "overwritten";
            case Disposition::EscapedToHost: return "escaped";
            default: return "pending";
        }
    }

private:
    static std::string hist_key(Origin o) { return std::string(origin_name(o)); }

    template <typename F>
    static void write_file(const std::filesystem::path& p, F&& body) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write " + p.string());
        body(out);
        out.flush();
        if (!out) throw IoError("write failed for " + p.string());
    }

    Options opt_;
    std::vector<std::array<CoverageCounts, 4>> coverage_;
    std::vector<WindowSample> windows_;
    std::vector<ErrorRecord> records_;
    std::uint64_t pending_ = 0;
    std::map<std::string, Histogram> latency_;
    std::map<std::pair<std::string, std::string>, Histogram> latency_by_cause_;
    std::array<std::uint64_t, 4> outcomes_{};
    std::array<std::uint64_t, 3> ops_{};
    std::uint64_t edac_symbols_corrected_ = 0, edac_symbols_uncorrectable_ = 0;
    std::uint64_t fe_escapes_ = 0, ps_escapes_ = 0;
    std::uint64_t reconstructions_ = 0;
    std::uint64_t data_loss_events_ = 0;
    std::optional<SimTime> first_data_loss_;
    SimTime unavailable_time_ = 0;
    std::ostream* log_ = nullptr;
};

}  // namespace dependasim
