// Acceptance run: one PASS/FAIL line per headline criterion. Exit status is the number
// of failed criteria (0 when everything passes).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dependasim/config.hpp"
#include "dependasim/report.hpp"
#include "dependasim/runner.hpp"
#include "dependasim/stats.hpp"

using namespace dependasim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct DeskRun {
    std::unique_ptr<SimulationRun> run;
    double seconds = 0;
};

DeskRun desk_run(RunConfig cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    DeskRun d;
    d.run = std::make_unique<SimulationRun>(cfg, resolve_burst_table(cfg, cfg.seed));
    d.run->execute();
    d.seconds = seconds_since(t0);
    return d;
}

// ---- 1. burst calibration ----

void burst_calibration() {
    const auto cfg = paper_profile();
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<BurstSummary> s;
    calibrate_burst_table(cfg.level2.timing, cfg.lambdas, cfg.level2.geometry, 10'000, cfg.seed, &s,
                          cfg.transient_duration);
    const double secs = seconds_since(t0);
    bool ok = secs < 60.0;
    std::string detail;
    const BurstSummary* bus1 = nullptr;
    const BurstSummary* bus2 = nullptr;
    for (const auto& b : s) {
        double target = 100.0;
        if (b.location == Location::CciMem) target = 800.0;
        if (b.location == Location::CciChan) target = 1000.0;
        ok &= std::abs(b.mean - target) <= 0.2 * target;
        detail += fmt("%s mean %.1f (target %.0f), ", std::string(location_name(b.location)).c_str(), b.mean, target);
        if (b.location == Location::Bus1) bus1 = &b;
        if (b.location == Location::Bus2) bus2 = &b;
    }
    const auto ks = ks_two_sample(bus1->raw, bus2->raw);
    ok &= !ks.reject_01();
    detail += fmt("KS bus1/bus2 D=%.4f crit(0.01)=%.4f, %.1f s", ks.statistic, ks.critical_01, secs);
    verdict(ok, "burst-calibration", detail);
}

// ---- 2. CRC coverage ----

void crc_coverage(const DeskRun& base) {
    const auto& m = base.run->metrics();
    bool ok = base.seconds < 300.0;
    std::string detail;
    for (auto mech : {Mechanism::FeCrc, Mechanism::PsCrc}) {
        const auto c = m.coverage_total(mech);
        const auto esc = m.crc_escapes(mech);
        // Full coverage unless the escape draw fired; every miss must be an escape.
        const bool good = esc == 0 ? c.coverage() == 1.0 : c.missed <= esc;
        ok &= good && c.checked > 0;
        detail += fmt("%s %llu checks coverage %.6f escapes %llu; ", std::string(mechanism_name(mech)).c_str(),
                      static_cast<unsigned long long>(c.checked), c.coverage(), static_cast<unsigned long long>(esc));
    }
    auto cfg = desk_profile();
    cfg.level2.faults.crc_escape = 0.0;
    const auto zero = desk_run(cfg);
    const auto& z = zero.run->metrics();
    const double fe = z.coverage_total(Mechanism::FeCrc).coverage();
    const double ps = z.coverage_total(Mechanism::PsCrc).coverage();
    ok &= fe == 1.0 && ps == 1.0 && z.outcomes(Outcome::Undetected) == 0 && zero.seconds < 300.0;
    detail += fmt("p_escape=0: fe %.6f ps %.6f undetected %llu (%.1f s, %.1f s)", fe, ps,
                  static_cast<unsigned long long>(z.outcomes(Outcome::Undetected)), base.seconds, zero.seconds);
    verdict(ok, "crc-coverage", detail);
}

// ---- 3. EDAC correction share ----

// P(count <= 2 | count >= 1) for one symbol of `sym_bits` bits when `k` flipped bits are
// placed uniformly without replacement over `total` bits (hypergeometric).
double share_exact(std::uint64_t k, std::uint64_t total, std::uint64_t sym_bits) {
    auto log_choose = [](double n, double r) { return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1); };
    auto pmf = [&](double c) {
        if (c > static_cast<double>(k)) return 0.0;
        return std::exp(log_choose(sym_bits, c) + log_choose(total - sym_bits, k - c) - log_choose(total, k));
    };
    const double p0 = pmf(0), p1 = pmf(1), p2 = pmf(2);
    return (p1 + p2) / (1.0 - p0);
}

// Averaged over burst lengths drawn from N(mean, sd), rounded and clamped to >= 1.
double share_oracle(double mean, double sd, std::uint64_t total, std::uint64_t sym_bits) {
    double num = 0, den = 0;
    const auto lo = static_cast<std::int64_t>(std::max(1.0, std::floor(mean - 8 * sd)));
    const auto hi = static_cast<std::int64_t>(std::ceil(mean + 8 * sd));
    for (std::int64_t k = lo; k <= hi; ++k) {
        const double w = std::exp(-0.5 * std::pow((static_cast<double>(k) - mean) / sd, 2));
        // Weight by the expected number of erroneous symbols, since the share is per symbol.
        const double syms = (static_cast<double>(total) / sym_bits) *
                            (1.0 - std::exp(std::lgamma(total - sym_bits + 1.0) - std::lgamma(total - sym_bits - k + 1.0) -
                                            std::lgamma(total + 1.0) + std::lgamma(total - k + 1.0)));
        num += w * syms * share_exact(static_cast<std::uint64_t>(k), total, sym_bits);
        den += w * syms;
    }
    return num / den;
}

// Monte Carlo route to the same number with a separate generator and sampler.
double share_monte_carlo(double mean, double sd, std::uint64_t total, std::uint64_t sym_bits, int trials) {
    std::mt19937_64 gen(20240601);
    std::normal_distribution<double> len(mean, sd);
    std::uniform_int_distribution<std::uint64_t> bit(0, total - 1);
    std::uint64_t le2 = 0, any = 0;
    for (int t = 0; t < trials; ++t) {
        const auto k = static_cast<std::uint64_t>(std::max(1.0, std::round(len(gen))));
        std::unordered_set<std::uint64_t> bits;
        while (bits.size() < k) bits.insert(bit(gen));
        std::unordered_map<std::uint64_t, int> per_symbol;
        for (auto b : bits) ++per_symbol[b / sym_bits];
        for (const auto& [_, c] : per_symbol) {
            ++any;
            le2 += c <= 2;
        }
    }
    return static_cast<double>(le2) / static_cast<double>(any);
}

void edac_share() {
    auto cfg = desk_profile();
    auto& f = cfg.level2.faults;
    f.bus_per_h = f.cci_per_h = f.disk_per_h = 0;
    f.cache_component_per_h = f.disk_permanent_per_h = f.load_per_bit = 0;
    f.cache_memory_per_h = 5'000;
    cfg.calibrate = false;
    const auto run = desk_run(cfg);
    const double sim = run.run->metrics().edac_correction_share();
    const auto& g = cfg.level2.geometry;
    const double exact = share_oracle(f.burst_mean_bits, f.burst_sd_bits, g.record_bits(), g.bits_per_symbol);
    const double mc = share_monte_carlo(f.burst_mean_bits, f.burst_sd_bits, g.record_bits(), g.bits_per_symbol, 200'000);
    const bool ok = sim >= 0.98 && std::abs(sim - exact) <= 0.01 && std::abs(mc - exact) <= 0.002;
    verdict(ok, "edac-correction-share",
            fmt("simulated %.5f, combinatorial oracle %.5f, Monte Carlo oracle %.5f (tolerance 0.01)", sim, exact, mc));
}

// ---- 4. coverage ordering ----

void coverage_ordering(const DeskRun& base) {
    const auto& m = base.run->metrics();
    const auto p = m.coverage_total(Mechanism::Parity);
    const auto e = m.coverage_total(Mechanism::Edac);
    const auto fe = m.coverage_total(Mechanism::FeCrc);
    const auto ps = m.coverage_total(Mechanism::PsCrc);
    const bool enough = p.checked >= 500 && e.checked >= 500 && fe.checked >= 500 && ps.checked >= 500;
    const bool ordered = p.coverage() < e.coverage() && e.coverage() < fe.coverage() && e.coverage() < ps.coverage();
    verdict(enough && ordered, "coverage-ordering",
            fmt("parity %.6f (%llu) < edac %.6f (%llu) < fe_crc %.6f (%llu), ps_crc %.6f (%llu)", p.coverage(),
                static_cast<unsigned long long>(p.checked), e.coverage(), static_cast<unsigned long long>(e.checked),
                fe.coverage(), static_cast<unsigned long long>(fe.checked), ps.coverage(),
                static_cast<unsigned long long>(ps.checked)));
}

// ---- 5. latency ----

void latency(const DeskRun& base) {
    const auto& m = base.run->metrics();
    const auto bm = bimodality(m.latency("ALL"));
    const double b1 = median_ms(m.latency_by_cause("B1", "parity"));
    const double d = median_ms(m.latency("D"));
    const double cm = median_ms(m.latency("CM"));
    const bool ok = bm.bimodal && b1 < 1.0 && d > cm;
    verdict(ok, "latency-bimodality",
            fmt("ALL bimodal=%s (Ashman D %.2f, low weight %.3f), B1 parity median %.2f ms, D median %.1f ms > CM "
                "median %.1f ms",
                bm.bimodal ? "yes" : "no", bm.ashman_d, bm.low_weight, b1, d, cm));
}

// ---- 6. accumulation trends ----

void trends(const DeskRun& base) {
    std::vector<double> cache, disk;
    for (const auto& w : base.run->metrics().windows()) {
        cache.push_back(w.cache_fraction);
        disk.push_back(w.disk_fraction);
    }
    const auto t = trend_check(cache, disk);
    const bool ok = t.disk_fit.slope > 0 && t.disk_fit.p_two_sided < 0.05 &&
                    t.cache_second_max <= 1.5 * t.cache_first_max;
    verdict(ok, "accumulation-trends",
            fmt("disk slope %.5f/window p=%.2g over %zu windows; cache max first half %.4f, second half %.4f", t.disk_fit.slope,
                t.disk_fit.p_two_sided, disk.size(), t.cache_first_max, t.cache_second_max));
}

// ---- 7. reconstruction condition ----

void reconstruction() {
    auto cfg = desk_profile();
    auto& f = cfg.level2.faults;
    f.bus_per_h = f.cci_per_h = f.cache_memory_per_h = f.disk_per_h = 0;
    f.cache_component_per_h = f.disk_permanent_per_h = f.load_per_bit = 0;
    Simulator sim;
    RngRegistry rngs(1);
    Metrics metrics({cfg.metrics_window, cfg.duration, cfg.coverage_unit});
    Level2Model model(cfg.level2_config(), BurstTable{}, sim, metrics, rngs);
    auto& disks = model.disks();
    const std::uint32_t members = disks.members_per_row();
    std::uint64_t cases = 0, agree = 0;
    std::vector<std::uint32_t> subset;
    for (std::uint32_t row = 0; row < disks.rows(); ++row) {
        // Every subset of members with 0..5 elements.
        for (std::uint32_t mask = 0; mask < (1u << members); ++mask) {
            if (std::popcount(mask) > 5) continue;
            std::uint32_t erased = 0;
            for (std::uint32_t k = 0; k < members; ++k) {
                if (!(mask >> k & 1)) continue;
                // Brute-force scanner: a member counts only if the row really has it.
                const bool exists = k >= cfg.level2.array.n_data ||
                                    std::uint64_t{row} * cfg.level2.array.n_data + k < cfg.workload.n_tracks;
                erased += exists;
                disks.set_member_valid(row, k, false);
            }
            const bool expect = erased <= 2;
            const bool got = model.reconstruct_row(row);
            bool restored = true;
            for (std::uint32_t k = 0; k < members; ++k) restored &= !disks.member_invalid(row, k);
            ++cases;
            agree += got == expect && (!got || restored);
            for (std::uint32_t k = 0; k < members; ++k) disks.set_member_valid(row, k, true);
        }
    }
    verdict(agree == cases, "reconstruction-condition",
            fmt("%llu/%llu row x erasure-set cases agree with the scanner over %u rows",
                static_cast<unsigned long long>(agree), static_cast<unsigned long long>(cases), disks.rows()));
}

// ---- 8. workload statistics ----

void workload() {
    const auto cfg = paper_profile();
    RngRegistry rngs(cfg.seed);
    const auto reqs = gen_synthetic(cfg.workload, rngs.fork("workload"), 1'000'000);
    const auto st = compute_stats(reqs);
    const double top = st.top_k_share(100);
    const bool ok = std::abs(st.read_fraction() - 0.86) <= 0.005 && std::abs(st.fast_write_fraction() - 0.114) <= 0.005 &&
                    std::abs(st.write_through_fraction() - 0.026) <= 0.005 && std::abs(top - 0.80) <= 0.02 &&
                    std::abs(st.mean_interarrival_ms - 5.0) <= 0.25;
    verdict(ok, "workload-statistics",
            fmt("mix %.4f/%.4f/%.4f, top-100 share %.4f, mean interarrival %.4f ms over %llu requests",
                st.read_fraction(), st.fast_write_fraction(), st.write_through_fraction(), top, st.mean_interarrival_ms,
                static_cast<unsigned long long>(st.total)));
}

// ---- 9. determinism ----

std::uint64_t file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return detail::fnv1a(s.str());
}

void determinism() {
    const auto root = fs::temp_directory_path() / "dependasim_acceptance";
    fs::remove_all(root);
    const auto cfg = desk_profile();
    run_and_export(cfg, root / "a");
    run_and_export(cfg, root / "b");
    bool ok = true;
    std::string detail;
    std::vector<fs::path> names;
    for (const auto& entry : fs::directory_iterator(root / "a")) names.push_back(entry.path().filename());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        const auto da = file_digest(root / "a" / name), db = file_digest(root / "b" / name);
        ok &= da == db;
        detail += fmt("%s %016llx%s ", name.string().c_str(), static_cast<unsigned long long>(da), da == db ? "" : " (differs)");
    }
    fs::remove_all(root);
    verdict(ok, "determinism", detail);
}

// ---- 10. zero-fault sanity ----

void zero_fault() {
    auto cfg = desk_profile();
    auto& f = cfg.level2.faults;
    f.bus_per_h = f.cci_per_h = f.cache_memory_per_h = f.disk_per_h = 0;
    f.xfer_channel_per_h = f.xfer_disk_per_h = 0;
    f.cache_component_per_h = f.disk_permanent_per_h = f.load_per_bit = 0;
    cfg.calibrate = false;
    const auto run = desk_run(cfg);
    const auto& m = run.run->metrics();
    std::uint64_t checks = 0, hist = 0;
    for (auto mech : kAllMechanisms) checks += m.coverage_total(mech).checked;
    for (const auto& k : Metrics::histogram_keys()) hist += m.latency(k).size();
    const bool ok = m.requests() > 0 && m.outcomes(Outcome::Success) == m.requests() && checks == 0 && hist == 0 &&
                    m.records().empty();
    verdict(ok, "zero-fault-sanity",
            fmt("%llu/%llu requests SUCCESS, %llu detections, %llu histogram buckets",
                static_cast<unsigned long long>(m.outcomes(Outcome::Success)),
                static_cast<unsigned long long>(m.requests()), static_cast<unsigned long long>(checks),
                static_cast<unsigned long long>(hist)));
}

}  // namespace

int main() {
    burst_calibration();
    const auto base = desk_run(desk_profile());
    crc_coverage(base);
    edac_share();
    coverage_ordering(base);
    latency(base);
    trends(base);
    reconstruction();
    workload();
    determinism();
    zero_fault();
    std::printf("%d criteria failed\n", failures);
    return failures;
}
