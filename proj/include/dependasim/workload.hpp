#pragma once

// Track-request streams: trace file reader/writer, skewed synthetic generator,
// and the summary statistics used to check a stream against its targets.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"

namespace dependasim {

using TrackId = std::uint32_t;

enum class Op : std::uint8_t { Read, FastWrite, WriteThrough };

inline std::string_view op_code(Op op) {
    switch (op) {
        case Op::Read: return "R";
        case Op::FastWrite: return "FW";
        case Op::WriteThrough: return "WT";
    }
    return "?";
}

inline std::optional<Op> parse_op_code(std::string_view s) {
    if (s == "R") return Op::Read;
    if (s == "FW") return Op::FastWrite;
    if (s == "WT") return Op::WriteThrough;
    return std::nullopt;
}

struct TrackRequest {
    SimTime arrival = 0;
    TrackId track = 0;
    Op op = Op::Read;

    bool operator==(const TrackRequest&) const = default;
};

struct OpMix {
    double read = 0.86;
    double fast_write = 0.114;
    double write_through = 0.026;

    bool operator==(const OpMix&) const = default;
};

struct WorkloadConfig {
    std::uint32_t n_tracks = 480'000;
    std::uint32_t n_active = 127'000;
    // Gives an 80% top-100 share over 127,000 active tracks (see calibrate_skew).
    double zipf_exponent = 1.2915;
    SimTime mean_interarrival = 5 * kMillisecond;
    OpMix mix;

    void validate() const {
        if (n_tracks == 0) throw ConfigError("workload.n_tracks must be positive");
        if (n_active == 0 || n_active > n_tracks)
            throw ConfigError("workload.n_active must be in [1, n_tracks]");
        if (!(zipf_exponent > 0.0)) throw ConfigError("workload.zipf_exponent must be > 0");
        if (mean_interarrival <= 0) throw ConfigError("workload.mean_interarrival must be positive");
        if (mix.read < 0 || mix.fast_write < 0 || mix.write_through < 0)
            throw ConfigError("workload.mix entries must be non-negative");
        if (std::abs(mix.read + mix.fast_write + mix.write_through - 1.0) > 1e-9)
            throw ConfigError("workload.mix must sum to 1");
    }
};

// Share of the k most popular ranks under a Zipf law with exponent s over n ranks.
inline double zipf_top_k_share(double s, std::uint64_t k, std::uint64_t n) {
    double head = 0.0, total = 0.0;
    for (std::uint64_t r = 1; r <= n; ++r) {
        const double w = std::pow(static_cast<double>(r), -s);
        if (r <= k) head += w;
        total += w;
    }
    return head / total;
}

// Finds the Zipf exponent whose top-k share equals `target` by bisection on the exact
// partial sums. The share is increasing in s, from k/n at s = 0.
inline double calibrate_skew(double target, std::uint64_t k, std::uint64_t n_active) {
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("skew target must be in (0, 1)");
    if (k == 0 || k >= n_active) throw ConfigError("skew k must be in [1, n_active)");
    double lo = 0.0, hi = 5.0;
    const double share_lo = zipf_top_k_share(lo, k, n_active);
    const double share_hi = zipf_top_k_share(hi, k, n_active);
    if (target < share_lo - 1e-12 || target > share_hi + 1e-12)
        throw ConfigError("skew target " + std::to_string(target) + " unreachable for exponent in [0, 5]");
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (zipf_top_k_share(mid, k, n_active) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Pull-based request stream.
class RequestSource {
public:
    virtual ~RequestSource() = default;
    virtual std::optional<TrackRequest> next() = 0;
};

// Unbounded synthetic stream: Zipf-ranked tracks mapped through a seeded permutation,
// exponential interarrivals quantised to whole microseconds (the trace resolution),
// i.i.d. operation types.
class SyntheticWorkload final : public RequestSource {
public:
    SyntheticWorkload(const WorkloadConfig& cfg, const RngStream& rng)
        : cfg_(cfg),
          perm_rng_(rng.substream(0)),
          arrival_rng_(rng.substream(1)),
          rank_rng_(rng.substream(2)),
          op_rng_(rng.substream(3)) {
        cfg_.validate();
        rank_to_track_.resize(cfg_.n_tracks);
        std::iota(rank_to_track_.begin(), rank_to_track_.end(), TrackId{0});
        std::shuffle(rank_to_track_.begin(), rank_to_track_.end(), perm_rng_.engine());
        rank_to_track_.resize(cfg_.n_active);
        rank_to_track_.shrink_to_fit();

        std::vector<double> weights(cfg_.n_active);
        for (std::uint32_t r = 0; r < cfg_.n_active; ++r)
            weights[r] = std::pow(static_cast<double>(r + 1), -cfg_.zipf_exponent);
        rank_dist_ = std::discrete_distribution<std::uint32_t>(weights.begin(), weights.end());
    }

    std::optional<TrackRequest> next() override {
        clock_ns_ += arrival_rng_.exponential(static_cast<double>(cfg_.mean_interarrival));
        auto us = static_cast<SimTime>(std::llround(clock_ns_ / kMicrosecond));
        if (last_us_ >= 0 && us <= last_us_) us = last_us_ + 1;
        last_us_ = us;

        TrackRequest req;
        req.arrival = us * kMicrosecond;
        req.track = rank_to_track_[rank_dist_(rank_rng_.engine())];
        const double u = op_rng_.uniform();
        if (u < cfg_.mix.read)
            req.op = Op::Read;
        else if (u < cfg_.mix.read + cfg_.mix.fast_write)
            req.op = Op::FastWrite;
        else
            req.op = Op::WriteThrough;
        return req;
    }

    // Track id for a popularity rank (0 = most popular).
    TrackId track_for_rank(std::uint32_t rank) const { return rank_to_track_.at(rank); }
    const WorkloadConfig& config() const { return cfg_; }

private:
    WorkloadConfig cfg_;
    RngStream perm_rng_, arrival_rng_, rank_rng_, op_rng_;
    std::vector<TrackId> rank_to_track_;
    std::discrete_distribution<std::uint32_t> rank_dist_;
    double clock_ns_ = 0.0;
    SimTime last_us_ = -1;
};

inline std::vector<TrackRequest> gen_synthetic(const WorkloadConfig& cfg, const RngStream& rng, std::size_t n) {
    SyntheticWorkload gen(cfg, rng);
    std::vector<TrackRequest> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(*gen.next());
    return out;
}

class VectorWorkload final : public RequestSource {
public:
    explicit VectorWorkload(std::vector<TrackRequest> reqs) : reqs_(std::move(reqs)) {}
    std::optional<TrackRequest> next() override {
        if (pos_ >= reqs_.size()) return std::nullopt;
        return reqs_[pos_++];
    }

private:
    std::vector<TrackRequest> reqs_;
    std::size_t pos_ = 0;
};

inline constexpr std::string_view kTraceHeader = "t_us,track,op";

namespace detail {

template <typename T>
bool parse_uint(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

}  // namespace detail

// Reads `t_us,track,op` rows. The header line is optional; rows must be sorted by time.
inline std::vector<TrackRequest> parse_trace(std::istream& in, std::uint32_t n_tracks) {
    std::vector<TrackRequest> out;
    std::string line;
    std::size_t lineno = 0;
    SimTime prev_us = -1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view row = detail::trim(line);
        if (row.empty()) continue;
        if (lineno == 1 && row == kTraceHeader) continue;

        const auto c1 = row.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
        if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
            throw FormatError("expected 3 comma-separated fields", lineno);
        std::uint64_t t_us = 0;
        std::uint64_t track = 0;
        if (!detail::parse_uint(detail::trim(row.substr(0, c1)), t_us))
            throw FormatError("bad t_us field", lineno);
        if (!detail::parse_uint(detail::trim(row.substr(c1 + 1, c2 - c1 - 1)), track))
            throw FormatError("bad track field", lineno);
        const auto op = parse_op_code(detail::trim(row.substr(c2 + 1)));
        if (!op) throw FormatError("op must be one of R, FW, WT", lineno);
        if (track >= n_tracks)
            throw FormatError("track " + std::to_string(track) + " out of range (n_tracks=" +
                                  std::to_string(n_tracks) + ")",
                              lineno);
        const auto t = static_cast<SimTime>(t_us);
        if (t < prev_us) throw FormatError("timestamps must be non-decreasing", lineno);
        prev_us = t;
        out.push_back(TrackRequest{t * kMicrosecond, static_cast<TrackId>(track), *op});
    }
    return out;
}

inline std::vector<TrackRequest> load_trace(const std::string& path, std::uint32_t n_tracks) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file: " + path);
    return parse_trace(in, n_tracks);
}

inline void write_trace(std::ostream& out, std::span<const TrackRequest> reqs) {
    out << kTraceHeader << '\n';
    for (const auto& r : reqs) out << r.arrival / kMicrosecond << ',' << r.track << ',' << op_code(r.op) << '\n';
}

struct WorkloadStats {
    std::uint64_t total = 0;
    std::unordered_map<TrackId, std::uint64_t> per_track;
    std::uint64_t reads = 0, fast_writes = 0, write_throughs = 0;
    double mean_interarrival_ms = 0.0;
    // Interarrival histogram in 0.5 ms bins; the last bin collects everything above 100 ms.
    std::vector<std::uint64_t> interarrival_hist = std::vector<std::uint64_t>(201, 0);

    static constexpr double kBinMs = 0.5;

    double read_fraction() const { return total ? static_cast<double>(reads) / total : 0.0; }
    double fast_write_fraction() const { return total ? static_cast<double>(fast_writes) / total : 0.0; }
    double write_through_fraction() const { return total ? static_cast<double>(write_throughs) / total : 0.0; }

    // Fraction of all accesses that went to the k most-accessed tracks.
    double top_k_share(std::size_t k) const {
        if (total == 0) return 0.0;
        std::vector<std::uint64_t> counts;
        counts.reserve(per_track.size());
        for (const auto& [_, c] : per_track) counts.push_back(c);
        k = std::min(k, counts.size());
        std::partial_sort(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(k), counts.end(),
                          std::greater<>());
        const auto head = std::accumulate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(k),
                                          std::uint64_t{0});
        return static_cast<double>(head) / static_cast<double>(total);
    }
};

inline WorkloadStats compute_stats(std::span<const TrackRequest> reqs) {
    WorkloadStats st;
    st.total = reqs.size();
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        const auto& r = reqs[i];
        ++st.per_track[r.track];
        switch (r.op) {
            case Op::Read: ++st.reads; break;
            case Op::FastWrite: ++st.fast_writes; break;
            case Op::WriteThrough: ++st.write_throughs; break;
        }
        // The first interarrival is measured from t = 0.
        const SimTime gap = r.arrival - (i ? reqs[i - 1].arrival : 0);
        const auto bin = std::min<std::size_t>(static_cast<std::size_t>(to_ms(gap) / WorkloadStats::kBinMs),
                                               st.interarrival_hist.size() - 1);
        ++st.interarrival_hist[bin];
    }
    if (!reqs.empty()) st.mean_interarrival_ms = to_ms(reqs.back().arrival) / static_cast<double>(reqs.size());
    return st;
}

}  // namespace dependasim
