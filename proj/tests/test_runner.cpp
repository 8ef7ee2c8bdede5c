#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dependasim/level1.hpp"
#include "dependasim/report.hpp"
#include "dependasim/runner.hpp"

using namespace dependasim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("dependasim_runner_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const std::vector<std::string> kFiles = {"coverage.csv",        "latency_hist.csv", "latency_by_cause.csv",
                                         "faulty_fraction.csv", "reconstruction.csv", "summary.json"};

// Desk geometry, 15 simulated minutes, a small calibration.
RunConfig short_desk(std::uint64_t seed = 1) {
    auto c = desk_profile();
    c.seed = seed;
    c.duration = 15 * kMinute;
    c.metrics_window = 5 * kMinute;
    c.calibrate_trials = 200;
    return c;
}

RunConfig zero_fault() {
    auto c = short_desk();
    c.calibrate = false;
    auto& f = c.level2.faults;
    f.bus_per_h = f.cci_per_h = f.cache_memory_per_h = f.disk_per_h = 0;
    f.cache_component_per_h = f.disk_permanent_per_h = f.load_per_bit = 0;
    return c;
}

}  // namespace

TEST(BurstTableSource, MissingTableIsAConfigError) {
    auto c = short_desk();
    c.calibrate = false;
    EXPECT_THROW(resolve_burst_table(c, 1), ConfigError);
    c.burst_table = "/nonexistent/bursts.csv";
    EXPECT_THROW(resolve_burst_table(c, 1), ConfigError);
    EXPECT_NO_THROW(resolve_burst_table(zero_fault(), 1));
}

TEST(BurstTableSource, FileMatchesInProcessCalibration) {
    auto c = short_desk();
    const auto calibrated = resolve_burst_table(c, 9);
    const auto path = scratch("bursts.csv");
    {
        std::ofstream out(path);
        calibrated.write_csv(out);
    }
    c.calibrate = false;
    c.burst_table = path.string();
    const auto loaded = resolve_burst_table(c, 0);
    for (auto loc : kTransferLocations) EXPECT_NEAR(loaded.mean(loc), calibrated.mean(loc), 1e-9);
    fs::remove(path);
}

TEST(Run, ZeroFaultSanity) {
    const auto c = zero_fault();
    SimulationRun run(c, resolve_burst_table(c, c.seed));
    run.execute();
    const auto& m = run.metrics();
    EXPECT_GT(m.requests(), 100'000u);
    EXPECT_EQ(m.outcomes(Outcome::Success), m.requests());
    EXPECT_TRUE(m.records().empty());
    for (auto mech : kAllMechanisms) EXPECT_EQ(m.coverage_total(mech).checked, 0u);
    for (const auto& k : Metrics::histogram_keys()) EXPECT_TRUE(m.latency(k).empty()) << k;
    ASSERT_EQ(m.windows().size(), 3u);
    for (const auto& w : m.windows()) {
        EXPECT_TRUE(w.taken);
        EXPECT_EQ(w.cache_fraction, 0.0);
        EXPECT_EQ(w.disk_fraction, 0.0);
    }
}

TEST(Run, WindowCountFollowsDuration) {
    auto c = zero_fault();
    c.duration = 24 * kHour;
    c.metrics_window = 15 * kMinute;
    SimulationRun run(c, BurstTable{});
    EXPECT_EQ(run.metrics().n_windows(), 96u);
}

TEST(Run, EveryWindowSnapshotted) {
    const auto c = short_desk();
    SimulationRun run(c, resolve_burst_table(c, c.seed));
    run.execute();
    for (const auto& w : run.metrics().windows()) {
        EXPECT_TRUE(w.taken);
        EXPECT_GE(w.cache_fraction, 0.0);
        EXPECT_LE(w.cache_fraction, 1.0);
        EXPECT_GE(w.disk_fraction, 0.0);
        EXPECT_LE(w.disk_fraction, 1.0);
    }
    EXPECT_TRUE(run.model().ledgers_consistent());
    EXPECT_GT(run.metrics().records().size(), 100u);
}

TEST(Run, SameSeedByteIdenticalFiles) {
    const auto a = scratch("det_a"), b = scratch("det_b"), d = scratch("det_c");
    run_and_export(short_desk(3), a);
    run_and_export(short_desk(3), b);
    run_and_export(short_desk(4), d);
    bool any_differs = false;
    for (const auto& f : kFiles) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        any_differs |= slurp(a / f) != slurp(d / f);
    }
    EXPECT_TRUE(any_differs);
    for (const auto& p : {a, b, d}) fs::remove_all(p);
}

TEST(Run, TraceReplayMatchesSyntheticStream) {
    auto c = short_desk(5);
    c.duration = 5 * kMinute;
    RngRegistry rngs(c.seed);
    SyntheticWorkload src(c.workload, rngs.fork("workload"));
    std::vector<TrackRequest> reqs;
    for (auto r = src.next(); r && r->arrival <= c.duration; r = src.next()) reqs.push_back(*r);
    const auto trace = scratch("trace.csv");
    {
        std::ofstream out(trace);
        write_trace(out, reqs);
    }
    const auto a = scratch("syn"), b = scratch("replay");
    run_and_export(c, a);
    c.trace = trace.string();
    run_and_export(c, b);
    for (const auto& f : kFiles) {
        if (f == "summary.json") continue;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_NE(slurp(b / "summary.json").find("\"workload\": \"trace\""), std::string::npos);
    for (const auto& p : {a, b, trace}) fs::remove_all(p);
}

TEST(Run, EventLogWritten) {
    const auto dir = scratch("verbose");
    auto c = short_desk();
    c.duration = kMinute;
    c.metrics_window = kMinute;
    run_and_export(c, dir, true);
    const auto log = slurp(dir / "events.jsonl");
    EXPECT_NE(log.find("\"event\":\"inject\""), std::string::npos);
    EXPECT_NE(log.find("\"event\":\"resolve\""), std::string::npos);
    fs::remove_all(dir);
}

TEST(Run, UnwritableOutputIsIoError) { EXPECT_THROW(run_and_export(zero_fault(), "/proc/dependasim/out"), IoError); }

TEST(RunMany, IsolatedRunsAndMergedSummary) {
    const auto dir = scratch("many");
    auto c = short_desk(11);
    c.duration = 5 * kMinute;
    const auto merged = run_many(c, 3, dir, false, 3);
    EXPECT_EQ(merged.at("runs"), 3);
    EXPECT_EQ(merged.at("seeds"), nlohmann::ordered_json({11, 12, 13}));

    // A run inside the batch equals the same seed run alone.
    const auto solo = scratch("solo");
    auto c12 = c;
    c12.seed = 12;
    run_and_export(c12, solo);
    for (const auto& f : kFiles) EXPECT_EQ(slurp(dir / "run_12" / f), slurp(solo / f)) << f;

    std::uint64_t requests = 0, success = 0;
    for (std::uint64_t s : {11, 12, 13}) {
        auto j = nlohmann::json::parse(slurp(dir / ("run_" + std::to_string(s)) / "summary.json"));
        requests += j["requests"].get<std::uint64_t>();
        success += j["outcomes"]["SUCCESS"].get<std::uint64_t>();
    }
    EXPECT_EQ(merged.at("requests").get<std::uint64_t>(), requests);
    EXPECT_DOUBLE_EQ(merged.at("p_success").get<double>(), static_cast<double>(success) / requests);
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
    EXPECT_THROW(run_many(c, 0, dir), ConfigError);
    fs::remove_all(dir);
    fs::remove_all(solo);
}

// The black-box view built from a run's outcome probabilities predicts the file-level
// outcome mix of grouping that same run's track outcomes into files.
TEST(CrossLevel, BlackBoxMatchesDirectGrouping) {
    auto c = short_desk(21);
    c.duration = 10 * kMinute;
    c.level2.faults.cache_memory_per_h = 5e4;
    c.level2.faults.disk_per_h = 5e3;
    const auto lcfg = c.level2_config();
    Simulator sim;
    RngRegistry rngs(c.seed);
    Metrics metrics({c.metrics_window, c.duration, c.coverage_unit});
    Level2Model model(lcfg, resolve_burst_table(c, c.seed), sim, metrics, rngs);
    SyntheticWorkload src(c.workload, rngs.fork("workload"));
    std::vector<Outcome> outcomes;
    model.start(c.duration);
    std::function<void()> pump = [&] {
        auto r = src.next();
        if (!r || r->arrival > c.duration) return;
        sim.schedule(r->arrival, EventKind::RequestArrival, [&, req = *r] {
            outcomes.push_back(model.process(req));
            pump();
        });
    };
    pump();
    sim.run_until(c.duration);

    BlackBoxProbabilities p = BlackBoxProbabilities::from_json(metrics.summary({}));
    ASSERT_LT(p.p_success, 0.999);

    FileSizeDist sizes{1, 8};
    RngStream size_rng("sizes", 1);
    std::uint64_t files = 0, direct_bad = 0;
    for (std::size_t i = 0; i < outcomes.size();) {
        const auto k = std::min<std::size_t>(sizes.sample(size_rng), outcomes.size() - i);
        direct_bad += classify_file(std::span<const Outcome>(outcomes.data() + i, k)) != Outcome::Success;
        ++files;
        i += k;
    }
    RngStream bb_rng("bb", 2);
    const auto study = run_file_study(p, files, sizes, bb_rng);
    const double direct = static_cast<double>(direct_bad) / static_cast<double>(files);
    const double model_bad = 1.0 - study.fraction(Outcome::Success);
    // Outcomes cluster on hot tracks, so allow a generous band around the independence model.
    EXPECT_NEAR(direct, model_bad, 0.25 * model_bad) << "direct " << direct << " black-box " << model_bad;
}

TEST(Report, ZeroFaultShowsNa) {
    const auto dir = scratch("report0");
    run_and_export(zero_fault(), dir);
    const auto text = render_report(load_report(dir));
    std::istringstream lines(text);
    int na_rows = 0;
    for (std::string line; std::getline(lines, line);)
        for (const char* m : {"  parity ", "  edac ", "  fe_crc ", "  ps_crc "})
            if (line.rfind(m, 0) == 0 && line.compare(line.size() - 5, 5, "  n/a") == 0) ++na_rows;
    EXPECT_EQ(na_rows, 4) << text;
    EXPECT_NE(text.find("ALL bimodal: no"), std::string::npos);
    EXPECT_EQ(text, render_report(load_report(dir)));
    fs::remove_all(dir);
    EXPECT_THROW(load_report(dir), ConfigError);
}

TEST(Report, DeskRunSections) {
    const auto dir = scratch("report1");
    run_and_export(short_desk(2), dir);
    const auto d = load_report(dir);
    ASSERT_EQ(d.coverage.size(), 4u);
    EXPECT_EQ(d.disk_fraction.size(), 3u);
    EXPECT_FALSE(d.latency.at("ALL").empty());
    const auto text = render_report(d);
    EXPECT_NE(text.find("disk fraction slope"), std::string::npos);
    EXPECT_NE(text.find("B1 parity-detected median"), std::string::npos);
    fs::remove_all(dir);
}
