#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dependasim/metrics.hpp"

using namespace dependasim;

namespace {

Metrics make(SimTime duration = kHour, CoverageUnit unit = CoverageUnit::Codeword) {
    return Metrics({15 * kMinute, duration, unit});
}

SymbolErrors bits(std::uint32_t n) {
    SymbolErrors e{Geometry{}};
    e.set(0, n);
    return e;
}

CheckOutcome outcome(CheckResult r, std::uint32_t corrected, std::uint32_t detected, std::uint32_t missed) {
    CheckOutcome o;
    o.result = r;
    o.corrected_symbols = corrected;
    o.detected_symbols = detected;
    o.missed_symbols = missed;
    o.erroneous_symbols = corrected + detected + missed;
    return o;
}

}  // namespace

TEST(Metrics, WindowsCoverDuration) {
    auto m = make(kHour + 1);
    EXPECT_EQ(m.n_windows(), 5u);
    EXPECT_EQ(m.window_of(0), 0u);
    EXPECT_EQ(m.window_of(15 * kMinute), 1u);
    EXPECT_EQ(m.window_of(10 * kHour), 4u);
    EXPECT_THROW(Metrics({0, kHour, CoverageUnit::Codeword}), ConfigError);
}

TEST(Metrics, CleanChecksDoNotCount) {
    auto m = make();
    m.on_check(0, Mechanism::FeCrc, CheckOutcome{});
    EXPECT_EQ(m.coverage_total(Mechanism::FeCrc).checked, 0u);
    EXPECT_TRUE(std::isnan(m.coverage_total(Mechanism::FeCrc).coverage()));
}

TEST(Metrics, CodewordUnitsCountSymbols) {
    auto m = make();
    m.on_check(0, Mechanism::Edac, outcome(CheckResult::Detected, 8, 1, 1));
    auto c = m.coverage_total(Mechanism::Edac);
    EXPECT_EQ(c.checked, 10u);
    EXPECT_EQ(c.detected, 9u);
    EXPECT_EQ(c.corrected, 8u);
    EXPECT_EQ(c.missed, 1u);
    EXPECT_DOUBLE_EQ(c.coverage(), 0.9);
    EXPECT_NEAR(m.edac_correction_share(), 8.0 / 9.0, 1e-12);

    m.on_check(0, Mechanism::FeCrc, outcome(CheckResult::Detected, 0, 50, 0));
    EXPECT_EQ(m.coverage_total(Mechanism::FeCrc).checked, 1u);
}

TEST(Metrics, CheckUnitsCountOnce) {
    auto m = make(kHour, CoverageUnit::Check);
    m.on_check(0, Mechanism::Parity, outcome(CheckResult::Detected, 0, 3, 2));
    m.on_check(0, Mechanism::Parity, outcome(CheckResult::Missed, 0, 0, 2));
    auto c = m.coverage_total(Mechanism::Parity);
    EXPECT_EQ(c.checked, 2u);
    EXPECT_EQ(c.detected, 1u);
    EXPECT_EQ(c.missed, 1u);
}

TEST(Metrics, CoveragePerWindow) {
    auto m = make();
    m.on_check(20 * kMinute, Mechanism::PsCrc, outcome(CheckResult::Detected, 0, 2, 0));
    EXPECT_EQ(m.coverage_window(1, Mechanism::PsCrc).checked, 1u);
    EXPECT_EQ(m.coverage_window(0, Mechanism::PsCrc).checked, 0u);
}

TEST(Metrics, ResolveExactlyOnce) {
    auto m = make();
    const auto id = m.inject(10, Location::CacheMemory, bits(3), false);
    EXPECT_EQ(m.pending(), 1u);
    m.resolve(id, Disposition::Corrected, Mechanism::Edac, 5 * kMillisecond, 10);
    EXPECT_EQ(m.pending(), 0u);
    EXPECT_THROW(m.resolve(id, Disposition::Overwritten, std::nullopt, 6 * kMillisecond, 10), std::logic_error);
    const auto& r = m.record(id);
    EXPECT_EQ(r.disposition, Disposition::Corrected);
    EXPECT_EQ(r.bits, 3u);
    EXPECT_GE(r.resolved_at, r.injected_at);
    EXPECT_NO_THROW(m.check_conservation());
}

TEST(Metrics, LatencyHistogramBuckets) {
    auto m = make();
    const auto a = m.inject(0, Location::Bus1, bits(1), false);
    const auto b = m.inject(0, Location::CciMem, bits(1), false);
    const auto c = m.inject(0, Location::Disk, bits(1), true);
    m.resolve(a, Disposition::Detected, Mechanism::Parity, 250 * kMicrosecond, 0);
    m.resolve(b, Disposition::Detected, Mechanism::FeCrc, 3 * kMillisecond, 0);
    m.resolve(c, Disposition::Detected, Mechanism::FeCrc, 3 * kMillisecond, 0);
    EXPECT_EQ(m.latency("B1").at(2), 1u);
    EXPECT_EQ(m.latency("CCI").at(30), 1u);
    EXPECT_EQ(m.latency("CCI_MEM").at(30), 1u);
    EXPECT_TRUE(m.latency("D").empty());  // propagated copies stay out
    EXPECT_EQ(m.latency("ALL").size(), 2u);
    EXPECT_EQ(m.latency_by_cause("B1", "parity").at(2), 1u);
}

TEST(Metrics, SummaryProbabilities) {
    auto m = make();
    auto s0 = m.summary({});
    EXPECT_EQ(s0["p_success"], 1.0);
    EXPECT_EQ(s0["requests"], 0);
    for (int i = 0; i < 3; ++i) m.on_outcome(0, Op::Read, Outcome::Success, 1);
    m.on_outcome(0, Op::FastWrite, Outcome::Unavailable, 2);
    auto s = m.summary({{"seed", 7}});
    EXPECT_EQ(s["seed"], 7);
    EXPECT_DOUBLE_EQ(s["p_success"].get<double>(), 0.75);
    EXPECT_DOUBLE_EQ(s["p_unavailable"].get<double>(), 0.25);
    EXPECT_DOUBLE_EQ(s["availability_requests"].get<double>(), 0.75);
    EXPECT_EQ(s["ops"]["FW"], 1);
    EXPECT_TRUE(s["coverage"]["parity"]["coverage"].is_null());
}

TEST(Metrics, AvailabilityTimeAndDataLoss) {
    auto m = make();
    m.on_unavailable(0, 6 * kMinute);
    m.on_data_loss(30 * kMinute);
    m.on_data_loss(40 * kMinute);
    auto s = m.summary({});
    EXPECT_DOUBLE_EQ(s["availability_time"].get<double>(), 0.9);
    EXPECT_EQ(s["data_loss_events"], 2);
    EXPECT_DOUBLE_EQ(s["time_to_first_data_loss_h"].get<double>(), 0.5);
}

TEST(Metrics, ExportWritesAllFiles) {
    auto m = make();
    m.on_reconstruction(0, 3);
    m.snapshot(0, 0.1, 0.2, 0.3);
    const auto dir = std::filesystem::temp_directory_path() / "dependasim_metrics_test";
    std::filesystem::remove_all(dir);
    m.export_all(dir, {});
    for (const char* f : {"coverage.csv", "latency_hist.csv", "latency_by_cause.csv", "faulty_fraction.csv",
                          "reconstruction.csv", "summary.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    std::ifstream in(dir / "faulty_fraction.csv");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    EXPECT_EQ(first, "0,0.1,0.2,0.3");
    std::ifstream rec(dir / "reconstruction.csv");
    std::getline(rec, header);
    std::getline(rec, first);
    EXPECT_EQ(first, "0,3,3.333333333e-06");
    std::filesystem::remove_all(dir);
}

TEST(Metrics, ExportToUnwritablePathFails) {
    auto m = make();
    EXPECT_THROW(m.export_all("/proc/dependasim/nope", {}), IoError);
}

TEST(Metrics, EventLogLines) {
    auto m = make();
    std::ostringstream log;
    m.set_event_log(&log);
    const auto id = m.inject(1, Location::Bus2, bits(2), false);
    m.resolve(id, Disposition::Corrected, Mechanism::Edac, 2, 1);
    m.on_outcome(3, Op::Read, Outcome::DetectedUncorrected, 9);
    std::istringstream in(log.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("event"));
        ++n;
    }
    EXPECT_EQ(n, 3);
}

TEST(Metrics, SeverityOrder) {
    EXPECT_GT(severity(Outcome::Undetected), severity(Outcome::Unavailable));
    EXPECT_GT(severity(Outcome::Unavailable), severity(Outcome::DetectedUncorrected));
    EXPECT_GT(severity(Outcome::DetectedUncorrected), severity(Outcome::Success));
}

TEST(Metrics, OriginCodes) {
    EXPECT_EQ(origin_of(Location::CciChan), Origin::CCI);
    EXPECT_EQ(origin_of(Location::CciMem), Origin::CCI);
    EXPECT_EQ(origin_detail_of(Location::CciMem), OriginDetail::CCI_MEM);
    EXPECT_EQ(origin_of(Location::XferCacheToDisk), Origin::D);
    EXPECT_EQ(origin_name(origin_of(Location::Bus2)), "B2");
}
