#pragma once

// One simulation run end to end: burst table, request stream, Level 2 model, window
// snapshots and metrics export. run_many executes several seeds on worker threads.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dependasim/config.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/level2.hpp"
#include "dependasim/level3.hpp"
#include "dependasim/metrics.hpp"
#include "dependasim/workload.hpp"

namespace dependasim {

inline bool needs_burst_table(const RunConfig& cfg) {
    for (auto loc : kTransferLocations)
        if (cfg.level2.faults.transfer_rate_per_h(loc) > 0.0) return true;
    return false;
}

// Loads the configured table, or calibrates one when run.calibrate is set. A run whose
// transfer fault rates are all zero needs neither.
inline BurstTable resolve_burst_table(const RunConfig& cfg, std::uint64_t seed) {
    if (!cfg.burst_table.empty()) return BurstTable::load(cfg.burst_table);
    if (cfg.calibrate)
        return calibrate_burst_table(cfg.level2.timing, cfg.lambdas, cfg.level2.geometry, cfg.calibrate_trials, seed,
                                     nullptr, cfg.transient_duration);
    if (needs_burst_table(cfg))
        throw ConfigError("run.burst_table: no burst table given and run.calibrate is false");
    return BurstTable{};
}

class SimulationRun {
public:
    SimulationRun(const RunConfig& cfg, BurstTable bursts, std::ostream* event_log = nullptr)
        : cfg_(cfg),
          rngs_(cfg.seed),
          metrics_(Metrics::Options{cfg.metrics_window, cfg.duration, cfg.coverage_unit}) {
        cfg_.validate();
        metrics_.set_event_log(event_log);
        model_ = std::make_unique<Level2Model>(cfg_.level2_config(), std::move(bursts), sim_, metrics_, rngs_);
        if (cfg_.trace.empty())
            source_ = std::make_unique<SyntheticWorkload>(cfg_.workload, rngs_.fork("workload"));
        else
            source_ = std::make_unique<VectorWorkload>(load_trace(cfg_.trace, cfg_.workload.n_tracks));
    }

    void execute() {
        const SimTime end = cfg_.duration;
        for (std::size_t w = 0; w < metrics_.n_windows(); ++w) {
            const SimTime at = std::min(end, static_cast<SimTime>(w + 1) * cfg_.metrics_window);
            sim_.schedule(at, EventKind::WindowClose, [this, w] {
                metrics_.snapshot(w, model_->cache_faulty_fraction(), model_->disk_faulty_fraction(),
                                  model_->dirty_fraction());
            });
        }
        model_->start(end);
        schedule_next_request();
        sim_.run_until(end);
        model_->finish();
        metrics_.check_conservation();
    }

    nlohmann::ordered_json meta() const {
        nlohmann::ordered_json m;
        m["profile"] = cfg_.profile;
        m["seed"] = cfg_.seed;
        m["duration_h"] = to_hours(cfg_.duration);
        m["window_min"] = static_cast<double>(cfg_.metrics_window) / static_cast<double>(kMinute);
        m["n_tracks"] = cfg_.workload.n_tracks;
        m["workload"] = cfg_.trace.empty() ? "synthetic" : "trace";
        return m;
    }

    nlohmann::ordered_json summary() const { return metrics_.summary(meta()); }
    void export_to(const std::filesystem::path& dir) const { metrics_.export_all(dir, meta()); }

    const RunConfig& config() const { return cfg_; }
    Metrics& metrics() { return metrics_; }
    const Metrics& metrics() const { return metrics_; }
    Level2Model& model() { return *model_; }
    Simulator& simulator() { return sim_; }

private:
    void schedule_next_request() {
        auto req = source_->next();
        if (!req || req->arrival > cfg_.duration) return;
        const SimTime at = std::max(req->arrival, sim_.now());
        sim_.schedule(at, EventKind::RequestArrival, [this, r = *req] {
            model_->submit(r);
            schedule_next_request();
        });
    }

    RunConfig cfg_;
    Simulator sim_;
    RngRegistry rngs_;
    Metrics metrics_;
    std::unique_ptr<Level2Model> model_;
    std::unique_ptr<RequestSource> source_;
};

// Runs one configuration and writes its metrics files (plus events.jsonl when
// `event_log` is set); returns the summary.
inline nlohmann::ordered_json run_and_export(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                             bool event_log = false) {
    auto bursts = resolve_burst_table(cfg, cfg.seed);
    std::ofstream events;
    if (event_log) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
        events.open(out_dir / "events.jsonl", std::ios::binary);
        if (!events) throw IoError("cannot write " + (out_dir / "events.jsonl").string());
    }
    SimulationRun run(cfg, std::move(bursts), event_log ? &events : nullptr);
    run.execute();
    run.export_to(out_dir);
    if (event_log && !events.flush()) throw IoError("write failed for " + (out_dir / "events.jsonl").string());
    return run.summary();
}

// Mean and sample standard deviation across runs for each scalar of interest.
inline nlohmann::ordered_json merge_summaries(const std::vector<nlohmann::ordered_json>& runs) {
    nlohmann::ordered_json out;
    out["runs"] = runs.size();
    auto& seeds = out["seeds"];
    seeds = nlohmann::ordered_json::array();
    for (const auto& r : runs) seeds.push_back(r.at("seed"));

    std::uint64_t requests = 0;
    std::array<std::uint64_t, 4> outcomes{};
    for (const auto& r : runs) {
        requests += r.at("requests").get<std::uint64_t>();
        for (auto o : kAllOutcomes)
            outcomes[static_cast<std::size_t>(o)] += r.at("outcomes").at(std::string(outcome_name(o))).get<std::uint64_t>();
    }
    out["requests"] = requests;
    auto pooled = [&](Outcome o) {
        if (requests == 0) return o == Outcome::Success ? 1.0 : 0.0;
        return static_cast<double>(outcomes[static_cast<std::size_t>(o)]) / static_cast<double>(requests);
    };
    out["p_success"] = pooled(Outcome::Success);
    out["p_detected_uncorrected"] = pooled(Outcome::DetectedUncorrected);
    out["p_undetected"] = pooled(Outcome::Undetected);
    out["p_unavailable"] = pooled(Outcome::Unavailable);

    auto stat = [&](auto get) {
        std::vector<double> xs;
        for (const auto& r : runs) {
            const auto v = get(r);
            if (v.is_number()) xs.push_back(v.template get<double>());
        }
        nlohmann::ordered_json s;
        s["n"] = xs.size();
        if (xs.empty()) {
            s["mean"] = nullptr;
            s["sd"] = nullptr;
            return s;
        }
        double mean = 0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double ss = 0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        s["mean"] = mean;
        s["sd"] = xs.size() > 1 ? nlohmann::ordered_json(std::sqrt(ss / static_cast<double>(xs.size() - 1)))
                                : nlohmann::ordered_json(nullptr);
        return s;
    };
    auto& across = out["across_runs"];
    for (const char* key : {"mean_reconstruction_rate_per_ms", "availability_time", "edac_correction_share"})
        across[key] = stat([key](const nlohmann::ordered_json& r) { return r.at(key); });
    for (auto m : kAllMechanisms) {
        const std::string name(mechanism_name(m));
        across["coverage_" + name] =
            stat([&name](const nlohmann::ordered_json& r) { return r.at("coverage").at(name).at("coverage"); });
    }
    std::optional<double> first_loss;
    for (const auto& r : runs) {
        const auto& v = r.at("time_to_first_data_loss_h");
        if (v.is_number()) first_loss = std::min(first_loss.value_or(v.get<double>()), v.get<double>());
    }
    out["earliest_data_loss_h"] = first_loss ? nlohmann::ordered_json(*first_loss) : nlohmann::ordered_json(nullptr);
    return out;
}

// Seeds seed, seed+1, ... each run in its own thread with isolated state; per-run files
// go to out_dir/run_<seed>/ and the merged summary to out_dir/summary.json.
inline nlohmann::ordered_json run_many(const RunConfig& base, std::uint32_t n_runs, const std::filesystem::path& out_dir,
                                       bool event_log = false, unsigned max_threads = 0) {
    if (n_runs == 0) throw ConfigError("--runs must be at least 1");
    base.validate();
    std::vector<nlohmann::ordered_json> results(n_runs);
    std::vector<std::exception_ptr> errors(n_runs);
    std::mutex next_mu;
    std::uint32_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::uint32_t i;
            {
                std::lock_guard<std::mutex> lock(next_mu);
                if (next == n_runs) return;
                i = next++;
            }
            try {
                RunConfig cfg = base;
                cfg.seed = base.seed + i;
                results[i] = run_and_export(cfg, out_dir / ("run_" + std::to_string(cfg.seed)), event_log);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (max_threads == 0) max_threads = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = std::min<unsigned>(max_threads, n_runs);
    std::vector<std::thread> threads;
    for (unsigned k = 0; k < n_threads; ++k) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    auto merged = merge_summaries(results);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (out_dir / "summary.json").string());
    out << merged.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + (out_dir / "summary.json").string());
    return merged;
}

}  // namespace dependasim
