#include <gtest/gtest.h>

#include "dependasim/config.hpp"

using namespace dependasim;

namespace {

bool same(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

}  // namespace

TEST(Duration, ParseUnits) {
    EXPECT_EQ(parse_duration("24h"), 24 * kHour);
    EXPECT_EQ(parse_duration("15m"), 15 * kMinute);
    EXPECT_EQ(parse_duration("5ms"), 5 * kMillisecond);
    EXPECT_EQ(parse_duration("10us"), 10 * kMicrosecond);
    EXPECT_EQ(parse_duration("7ns"), 7);
    EXPECT_EQ(parse_duration("60"), 60 * kSecond);
    EXPECT_EQ(parse_duration("1.5h"), 90 * kMinute);
    EXPECT_THROW(parse_duration("h"), ConfigError);
    EXPECT_THROW(parse_duration("5 parsecs"), ConfigError);
    EXPECT_THROW(parse_duration("-1s"), ConfigError);
}

TEST(Duration, FormatRoundTrip) {
    for (SimTime t : {SimTime{0}, kHour, 90 * kMinute, 5 * kMillisecond, SimTime{10240}, SimTime{7}, 61 * kSecond})
        EXPECT_EQ(parse_duration(format_duration(t)), t) << format_duration(t);
    EXPECT_EQ(format_duration(15 * kMinute), "15m");
}

TEST(Profiles, PaperMatchesDefaults) {
    auto c = profile_config("paper");
    EXPECT_EQ(c.workload.n_tracks, 480'000u);
    EXPECT_EQ(c.level2.cache.capacity, 24'000u);
    EXPECT_EQ(c.duration, 24 * kHour);
    EXPECT_DOUBLE_EQ(c.level2.faults.bus_per_h, 100.0);
    EXPECT_DOUBLE_EQ(c.level2.faults.cache_component_per_h, 1e-4);
    EXPECT_DOUBLE_EQ(c.level2.faults.repair_mean_h, 72.0);
    EXPECT_EQ(c.metrics_window, 15 * kMinute);
    EXPECT_NO_THROW(c.validate());
}

TEST(Profiles, DeskScaling) {
    auto c = profile_config("desk");
    EXPECT_EQ(c.workload.n_tracks, 4'800u);
    EXPECT_EQ(c.level2.cache.capacity, 240u);
    EXPECT_EQ(c.level2.array.n_data, 13u);
    EXPECT_EQ(c.duration, kHour);
    EXPECT_EQ(c.level2_config().n_tracks, 4'800u);
    EXPECT_NO_THROW(c.validate());
    EXPECT_THROW(profile_config("lab"), ConfigError);
}

TEST(Parse, OverridesAndComments) {
    auto c = parse_config(
        "# desk tweaks\n"
        "run.profile = desk\n"
        "run.seed=42   # inline comment\n"
        "workload.mean_interarrival=2ms\n"
        "faults.transfer_mode=window\n"
        "metrics.coverage_unit=check\n"
        "\n");
    EXPECT_EQ(c.profile, "desk");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.workload.n_tracks, 4'800u);
    EXPECT_EQ(c.workload.mean_interarrival, 2 * kMillisecond);
    EXPECT_EQ(c.level2.faults.transfer_mode, TransferFaultMode::Window);
    EXPECT_EQ(c.coverage_unit, CoverageUnit::Check);
}

TEST(Parse, ProfileLineAppliesBeforeOtherKeys) {
    auto c = parse_config("cache.capacity_tracks=100\nrun.profile=desk\n");
    EXPECT_EQ(c.level2.cache.capacity, 100u);
    EXPECT_EQ(c.workload.n_tracks, 4'800u);
}

TEST(Parse, FieldLevelErrors) {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("faults.bus_per_hour=3\n").find("unknown configuration key 'faults.bus_per_hour'"),
              std::string::npos);
    EXPECT_NE(message("\nrun.seed=abc\n").find("line 2: run.seed"), std::string::npos);
    EXPECT_NE(message("cache.cards\n").find("expected key=value"), std::string::npos);
    EXPECT_NE(message("run.seed=1\nrun.seed=2\n").find("already set"), std::string::npos);
    EXPECT_NE(message("faults.edac_on_write=maybe\n").find("faults.edac_on_write"), std::string::npos);
    EXPECT_NE(message("run.profile=lab\n").find("unknown profile"), std::string::npos);
}

TEST(Validate, RejectsBadValues) {
    auto c = paper_profile();
    c.workload.mix.read = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = paper_profile();
    c.lambdas.bus1 = 300;
    EXPECT_THROW(c.validate(), ConfigError);
    c = paper_profile();
    c.workload.n_active = c.workload.n_tracks + 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = paper_profile();
    c.level2.faults.crc_escape = -1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RoundTrip, SerializeParseSerialize) {
    for (const char* name : {"paper", "desk"}) {
        auto c = profile_config(name);
        c.seed = 123456789012345ULL;
        c.level2.faults.crc_escape = 1.0 / 3.0;
        c.lambdas.cci_mem = 0.7812345678901234;
        c.burst_table = "tables/bursts.csv";
        c.level2.faults.edac_on_write = true;
        const auto text = serialize_config(c);
        auto back = parse_config(text);
        EXPECT_TRUE(same(c, back)) << name;
        EXPECT_EQ(back.level2.faults.crc_escape, c.level2.faults.crc_escape);
        EXPECT_EQ(back.lambdas.cci_mem, c.lambdas.cci_mem);
        EXPECT_EQ(back.level2.faults, c.level2.faults);
        EXPECT_EQ(back.workload.mix, c.workload.mix);
    }
}

TEST(RoundTrip, EveryKeyListedOnce) {
    std::set<std::string> keys;
    for (const auto& f : config_fields()) EXPECT_TRUE(keys.insert(f.key).second) << f.key;
    const auto text = serialize_config(paper_profile());
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), keys.size());
}
