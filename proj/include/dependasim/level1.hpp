#pragma once

// Host view: files are sequences of track requests, and the storage subsystem is a
// black box that answers each track request with one of the four outcome classes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/metrics.hpp"
#include "dependasim/workload.hpp"

namespace dependasim {

enum class FileOp : std::uint8_t { Read, Write };
enum class WriteMode : std::uint8_t { Fast, Through };

struct FileRequest {
    std::uint64_t file_id = 0;
    FileOp op = FileOp::Read;
    std::vector<TrackId> tracks;

    void validate() const {
        if (tracks.empty()) throw ConfigError("file " + std::to_string(file_id) + " has no tracks");
        std::unordered_set<TrackId> seen;
        for (auto t : tracks)
            if (!seen.insert(t).second)
                throw ConfigError("file " + std::to_string(file_id) + " lists track " + std::to_string(t) + " twice");
    }
};

inline std::vector<TrackRequest> expand_file_request(const FileRequest& req, WriteMode mode, SimTime arrival = 0) {
    req.validate();
    const Op op = req.op == FileOp::Read ? Op::Read : mode == WriteMode::Fast ? Op::FastWrite : Op::WriteThrough;
    std::vector<TrackRequest> out;
    out.reserve(req.tracks.size());
    for (auto t : req.tracks) out.push_back({arrival, t, op});
    return out;
}

// The worst track outcome decides the file outcome.
inline Outcome classify_file(std::span<const Outcome> track_outcomes) {
    if (track_outcomes.empty()) throw ConfigError("cannot classify a file with no track outcomes");
    Outcome worst = Outcome::Success;
    for (auto o : track_outcomes)
        if (severity(o) > severity(worst)) worst = o;
    return worst;
}

inline Outcome classify_file(std::initializer_list<Outcome> track_outcomes) {
    return classify_file(std::span<const Outcome>(track_outcomes.begin(), track_outcomes.size()));
}

struct BlackBoxProbabilities {
    double p_success = 1.0;
    double p_detected_uncorrected = 0.0;
    double p_undetected = 0.0;
    double p_unavailable = 0.0;

    double of(Outcome o) const {
        switch (o) {
            case Outcome::Success: return p_success;
            case Outcome::DetectedUncorrected: return p_detected_uncorrected;
            case Outcome::Undetected: return p_undetected;
            case Outcome::Unavailable: return p_unavailable;
        }
        return 0.0;
    }

    void validate() const {
        double sum = 0;
        for (auto o : kAllOutcomes) {
            const double p = of(o);
            if (!(p >= 0.0 && p <= 1.0))
                throw ConfigError("probability of " + std::string(outcome_name(o)) + " must be in [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("black-box probabilities must sum to 1");
    }

    static BlackBoxProbabilities from_json(const nlohmann::json& j) {
        BlackBoxProbabilities p;
        try {
            p.p_success = j.at("p_success").get<double>();
            p.p_detected_uncorrected = j.at("p_detected_uncorrected").get<double>();
            p.p_undetected = j.at("p_undetected").get<double>();
            p.p_unavailable = j.at("p_unavailable").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("summary is missing outcome probabilities: ") + e.what());
        }
        p.validate();
        return p;
    }

    static BlackBoxProbabilities load(const std::string& summary_path) {
        std::ifstream in(summary_path);
        if (!in) throw IoError("cannot open " + summary_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(summary_path + ": " + e.what());
        }
        return from_json(j);
    }

    Outcome sample(RngStream& rng) const {
        double u = rng.uniform();
        for (auto o : {Outcome::DetectedUncorrected, Outcome::Undetected, Outcome::Unavailable}) {
            if (u < of(o)) return o;
            u -= of(o);
        }
        return Outcome::Success;
    }
};

inline Outcome sample_blackbox(const BlackBoxProbabilities& p, std::uint32_t n_tracks, RngStream& rng) {
    if (n_tracks == 0) throw ConfigError("a file spans at least one track");
    Outcome worst = Outcome::Success;
    for (std::uint32_t i = 0; i < n_tracks; ++i) {
        const Outcome o = p.sample(rng);
        if (severity(o) > severity(worst)) worst = o;
    }
    return worst;
}

// Number of tracks per file, uniform over [min_tracks, max_tracks].
struct FileSizeDist {
    std::uint32_t min_tracks = 1;
    std::uint32_t max_tracks = 8;

    void validate() const {
        if (min_tracks == 0 || max_tracks < min_tracks) throw ConfigError("file size range must satisfy 1 <= min <= max");
    }
    std::uint32_t sample(RngStream& rng) const {
        return static_cast<std::uint32_t>(rng.uniform_int(min_tracks, max_tracks));
    }
};

struct FileStudy {
    std::uint64_t files = 0;
    std::array<std::uint64_t, 4> counts{};

    double fraction(Outcome o) const {
        return files ? static_cast<double>(counts[static_cast<std::size_t>(o)]) / static_cast<double>(files) : 0.0;
    }
};

inline FileStudy run_file_study(const BlackBoxProbabilities& p, std::uint64_t n_files, const FileSizeDist& sizes,
                                RngStream& rng) {
    p.validate();
    sizes.validate();
    FileStudy s;
    for (std::uint64_t i = 0; i < n_files; ++i) {
        const auto o = sample_blackbox(p, sizes.sample(rng), rng);
        ++s.counts[static_cast<std::size_t>(o)];
        ++s.files;
    }
    return s;
}

}  // namespace dependasim
