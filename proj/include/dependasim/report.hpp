#pragma once

// Plain-text report over a metrics directory written by a run.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/metrics.hpp"
#include "dependasim/stats.hpp"

namespace dependasim {

struct CoverageRow {
    std::string mechanism;
    std::uint64_t checked = 0, detected = 0, corrected = 0, missed = 0;
    double coverage() const { return checked ? static_cast<double>(detected) / static_cast<double>(checked) : NAN; }
};

struct ReportData {
    std::vector<CoverageRow> coverage;  // cumulative rows
    std::map<std::string, Histogram> latency;
    std::map<std::pair<std::string, std::string>, Histogram> latency_by_cause;
    std::vector<double> cache_fraction, disk_fraction, dirty_fraction;
    nlohmann::ordered_json summary;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& p, std::string_view header) {
    std::ifstream in(p);
    if (!in) throw ConfigError("missing metrics file: " + p.string());
    std::string line;
    if (!std::getline(in, line) || line != header) throw ConfigError(p.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline std::uint64_t to_u64(const std::string& s, const std::filesystem::path& p) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(p.string() + ": bad integer '" + s + "'");
}

inline double to_double(const std::string& s, const std::filesystem::path& p) {
    if (s == "nan") return NAN;
    try {
        std::size_t used = 0;
        const auto v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(p.string() + ": bad number '" + s + "'");
}

inline std::string fixed(double v, int prec) {
    if (std::isnan(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace detail

inline ReportData load_report(const std::filesystem::path& dir) {
    ReportData d;
    {
        const auto p = dir / "coverage.csv";
        for (const auto& r : detail::read_csv_rows(p, "window,mechanism,checked,detected,corrected,missed,coverage")) {
            if (r.size() != 7) throw ConfigError(p.string() + ": expected 7 columns");
            if (r[0] != "cumulative") continue;
            d.coverage.push_back({r[1], detail::to_u64(r[2], p), detail::to_u64(r[3], p), detail::to_u64(r[4], p),
                                  detail::to_u64(r[5], p)});
        }
    }
    {
        const auto p = dir / "latency_hist.csv";
        for (const auto& r : detail::read_csv_rows(p, "origin,bucket_0p1ms,count")) {
            if (r.size() != 3) throw ConfigError(p.string() + ": expected 3 columns");
            d.latency[r[0]][detail::to_u64(r[1], p)] += detail::to_u64(r[2], p);
        }
    }
    {
        const auto p = dir / "latency_by_cause.csv";
        for (const auto& r : detail::read_csv_rows(p, "origin,cause,bucket_0p1ms,count")) {
            if (r.size() != 4) throw ConfigError(p.string() + ": expected 4 columns");
            d.latency_by_cause[{r[0], r[1]}][detail::to_u64(r[2], p)] += detail::to_u64(r[3], p);
        }
    }
    {
        const auto p = dir / "faulty_fraction.csv";
        for (const auto& r : detail::read_csv_rows(p, "window,cache_fraction,disk_fraction,dirty_fraction")) {
            if (r.size() != 4) throw ConfigError(p.string() + ": expected 4 columns");
            d.cache_fraction.push_back(detail::to_double(r[1], p));
            d.disk_fraction.push_back(detail::to_double(r[2], p));
            d.dirty_fraction.push_back(detail::to_double(r[3], p));
        }
    }
    {
        const auto p = dir / "summary.json";
        std::ifstream in(p);
        if (!in) throw ConfigError("missing metrics file: " + p.string());
        try {
            d.summary = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(p.string() + ": " + e.what());
        }
    }
    return d;
}

// Median in milliseconds of a 0.1 ms bucket histogram.
inline double median_ms(const Histogram& h) { return histogram_quantile(h, 0.5) * to_ms(kLatencyBucket); }

struct TrendCheck {
    LinearFit disk_fit;
    double cache_first_max = 0, cache_second_max = 0;
};

inline TrendCheck trend_check(const std::vector<double>& cache, const std::vector<double>& disk) {
    TrendCheck t;
    std::vector<double> x(disk.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    t.disk_fit = linear_fit(x, disk);
    const std::size_t half = cache.size() / 2;
    for (std::size_t i = 0; i < cache.size(); ++i)
        (i < half ? t.cache_first_max : t.cache_second_max) =
            std::max(i < half ? t.cache_first_max : t.cache_second_max, cache[i]);
    return t;
}

inline std::string render_report(const ReportData& d) {
    std::ostringstream o;
    const auto& s = d.summary;
    if (s.contains("profile")) o << "profile " << s["profile"].get<std::string>() << ", seed " << s["seed"].dump() << '\n';
    if (s.contains("requests")) {
        o << "requests " << s["requests"].dump();
        for (const char* k : {"p_success", "p_detected_uncorrected", "p_undetected", "p_unavailable"})
            if (s.contains(k) && s[k].is_number()) o << "  " << k << '=' << detail::fmt_double(s[k].get<double>());
        o << '\n';
    }
    o << "\ncoverage (cumulative)\n";
    o << "  mechanism      checked    detected   corrected      missed  coverage\n";
    for (const auto& c : d.coverage) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-9s %12llu %11llu %11llu %11llu  %s\n", c.mechanism.c_str(),
                      static_cast<unsigned long long>(c.checked), static_cast<unsigned long long>(c.detected),
                      static_cast<unsigned long long>(c.corrected), static_cast<unsigned long long>(c.missed),
                      detail::fixed(c.coverage(), 6).c_str());
        o << buf;
    }

    o << "\nlatency (ms)\n";
    o << "  origin        count       p10       p50       p90       p99\n";
    for (const auto& key : Metrics::histogram_keys()) {
        auto it = d.latency.find(key);
        const Histogram empty;
        const Histogram& h = it == d.latency.end() ? empty : it->second;
        std::uint64_t n = 0;
        for (const auto& [_, c] : h) n += c;
        char buf[160];
        const double b = to_ms(kLatencyBucket);
        std::snprintf(buf, sizeof buf, "  %-9s %9llu %9s %9s %9s %9s\n", key.c_str(), static_cast<unsigned long long>(n),
                      detail::fixed(histogram_quantile(h, 0.10) * b, 1).c_str(),
                      detail::fixed(histogram_quantile(h, 0.50) * b, 1).c_str(),
                      detail::fixed(histogram_quantile(h, 0.90) * b, 1).c_str(),
                      detail::fixed(histogram_quantile(h, 0.99) * b, 1).c_str());
        o << buf;
    }
    {
        auto it = d.latency.find("ALL");
        const auto bm = it == d.latency.end() ? Bimodality{} : bimodality(it->second);
        o << "  ALL bimodal: " << (bm.bimodal ? "yes" : "no");
        if (bm.ashman_d > 0)
            o << " (Ashman D " << detail::fixed(bm.ashman_d, 2) << ", low-mode weight " << detail::fixed(bm.low_weight, 3)
              << ", modes at " << detail::fixed(std::pow(10.0, bm.low_mean) * to_ms(kLatencyBucket), 1) << " and "
              << detail::fixed(std::pow(10.0, bm.high_mean) * to_ms(kLatencyBucket), 1) << " ms)";
        o << '\n';
    }
    {
        auto it = d.latency_by_cause.find({"B1", "parity"});
        o << "  B1 parity-detected median: "
          << (it == d.latency_by_cause.end() ? "n/a" : detail::fixed(median_ms(it->second), 1) + " ms") << '\n';
    }

    o << "\nfaulty tracks (" << d.disk_fraction.size() << " windows)\n";
    if (d.disk_fraction.size() >= 3) {
        const auto t = trend_check(d.cache_fraction, d.disk_fraction);
        o << "  disk fraction slope per window " << detail::fmt_double(t.disk_fit.slope) << " (p = "
          << detail::fmt_double(t.disk_fit.p_two_sided) << ")\n";
        o << "  cache fraction max, first half " << detail::fixed(t.cache_first_max, 4) << ", second half "
          << detail::fixed(t.cache_second_max, 4) << '\n';
    } else {
        o << "  too few windows for a trend\n";
    }
    if (!d.disk_fraction.empty())
        o << "  final: cache " << detail::fixed(d.cache_fraction.back(), 4) << ", disk "
          << detail::fixed(d.disk_fraction.back(), 4) << ", dirty " << detail::fixed(d.dirty_fraction.back(), 4) << '\n';
    if (s.contains("reconstructions"))
        o << "\nreconstructions " << s["reconstructions"].dump() << ", rate per ms "
          << detail::fmt_double(s.value("mean_reconstruction_rate_per_ms", 0.0)) << ", data-loss events "
          << s.value("data_loss_events", 0) << '\n';
    return o.str();
}

}  // namespace dependasim
