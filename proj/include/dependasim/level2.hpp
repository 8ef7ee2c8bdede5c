#pragma once

// Track-level model of the cache subsystem and the 13+2 disk array: cache operations,
// transient/stored/load-dependent fault injection, detection along each data path and
// the recovery sequence (retry, nonvolatile copy, disk, row reconstruction).
//
// Every replica of a track (volatile memory, nonvolatile memory, disk) carries a
// ledger of error entries. An entry is one ErrorRecord's live footprint plus the set
// of mechanisms that can still see it. A mechanism is blind to errors that were
// already in the data when its check bits were generated.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dependasim/codes.hpp"
#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"
#include "dependasim/level3.hpp"
#include "dependasim/metrics.hpp"
#include "dependasim/workload.hpp"

namespace dependasim {

enum class TransferFaultMode : std::uint8_t {
    Latch,   // each transient corrupts the next transfer through its location
    Window,  // a transfer is hit with probability rate x transfer duration
};

struct FaultPlan {
    // Transient rates per hour.
    double bus_per_h = 100.0;  // both busses together, split evenly
    double cci_per_h = 1.0;    // all interfaces together, split evenly by side
    double cache_memory_per_h = 1.0;
    double disk_per_h = 1.0;
    double xfer_channel_per_h = 0.0;
    double xfer_disk_per_h = 0.0;
    // Permanent failures and repair.
    double cache_component_per_h = 1e-4;
    double disk_permanent_per_h = 1e-6;
    double repair_mean_h = 72.0;
    // Load-dependent stored errors.
    double load_per_bit = 1e-14;
    // Stored-burst length law.
    double burst_mean_bits = 100.0;
    double burst_sd_bits = 10.0;
    double crc_escape = kDefaultCrcEscape;
    TransferFaultMode transfer_mode = TransferFaultMode::Latch;
    double retry_success_p = 0.0;
    bool edac_on_write = false;
    bool nvm_injection = false;

    bool operator==(const FaultPlan&) const = default;

    void validate() const {
        for (double r : {bus_per_h, cci_per_h, cache_memory_per_h, disk_per_h, xfer_channel_per_h, xfer_disk_per_h,
                         cache_component_per_h, disk_permanent_per_h, load_per_bit})
            if (!(r >= 0.0)) throw ConfigError("fault rates must be >= 0");
        if (!(repair_mean_h > 0.0)) throw ConfigError("faults.repair_mean_h must be > 0");
        if (!(burst_mean_bits >= 0.0) || !(burst_sd_bits >= 0.0))
            throw ConfigError("stored burst parameters must be >= 0");
        if (!(crc_escape >= 0.0 && crc_escape <= 1.0)) throw ConfigError("faults.crc_escape must be in [0, 1]");
        if (!(retry_success_p >= 0.0 && retry_success_p <= 1.0))
            throw ConfigError("faults.retry_success_p must be in [0, 1]");
    }

    // Per-location transient rate, per hour.
    double transfer_rate_per_h(Location l) const {
        switch (l) {
            case Location::Bus1:
            case Location::Bus2: return bus_per_h / 2.0;
            case Location::CciChan:
            case Location::CciMem: return cci_per_h / 2.0;
            case Location::XferChannelToCache: return xfer_channel_per_h;
            case Location::XferCacheToDisk: return xfer_disk_per_h;
            default: return 0.0;
        }
    }
};

struct CacheConfig {
    std::uint32_t capacity = 24'000;
    std::uint32_t cards = 4;
    std::uint32_t cci_chan = 2;
    std::uint32_t cci_mem = 2;
    double writeback_threshold = 0.25;
    SimTime writeback_period = 60 * kSecond;

    bool operator==(const CacheConfig&) const = default;

    void validate() const {
        if (capacity == 0) throw ConfigError("cache.capacity_tracks must be positive");
        if (cards == 0) throw ConfigError("cache.cards must be positive");
        if (cci_chan == 0 || cci_mem == 0) throw ConfigError("cache.cci_chan and cache.cci_mem must be positive");
        if (!(writeback_threshold > 0.0 && writeback_threshold <= 1.0))
            throw ConfigError("cache.writeback_threshold must be in (0, 1]");
        if (writeback_period <= 0) throw ConfigError("cache.writeback_period_s must be positive");
    }
};

struct ArrayConfig {
    std::uint32_t n_data = 13;
    static constexpr std::uint32_t n_redundancy = 2;
    SimTime reconstruct_time = 10 * kMillisecond;

    bool operator==(const ArrayConfig&) const = default;

    void validate() const {
        if (n_data == 0) throw ConfigError("array.n_data must be positive");
        if (reconstruct_time < 0) throw ConfigError("array.reconstruct_ms must be >= 0");
    }
};

struct Level2Config {
    std::uint32_t n_tracks = 480'000;
    Geometry geometry;
    CacheConfig cache;
    ArrayConfig array;
    FaultPlan faults;
    StageTiming timing;

    void validate() const {
        if (n_tracks == 0) throw ConfigError("workload.n_tracks must be positive");
        geometry.validate();
        cache.validate();
        array.validate();
        faults.validate();
        timing.validate();
    }
};

struct ErrorEntry {
    RecordId id = 0;
    Location origin = Location::CacheMemory;
    SimTime injected_at = 0;
    SymbolErrors errs;
    MechanismMask scope;
};

struct Replica {
    bool present = false;
    bool valid = false;
    std::vector<ErrorEntry> ledger;
    SimTime first_error = -1;  // latency clock for stored entries

    bool clean() const { return ledger.empty(); }
    bool has_scope(Mechanism m) const {
        return std::any_of(ledger.begin(), ledger.end(), [m](const ErrorEntry& e) { return e.scope.has(m); });
    }
};

struct CacheLine {
    TrackId track = 0;
    std::uint32_t slot = 0;
    Replica vm;
    Replica nvm;
    bool dirty = false;
    SimTime lru_stamp = 0;
};

enum class ComponentKind : std::uint8_t { CciChan, CciMem, MemoryCard, Disk };

inline std::string_view component_name(ComponentKind k) {
    switch (k) {
        case ComponentKind::CciChan: return "cci_chan";
        case ComponentKind::CciMem: return "cci_mem";
        case ComponentKind::MemoryCard: return "card";
        case ComponentKind::Disk: return "disk";
    }
    return "?";
}

enum class RecoverySource : std::uint8_t { Retry, Nvm, Disk, Reconstruction, DataLost };

inline std::string_view recovery_source_name(RecoverySource s) {
    switch (s) {
        case RecoverySource::Retry: return "retry";
        case RecoverySource::Nvm: return "nvm";
        case RecoverySource::Disk: return "disk";
        case RecoverySource::Reconstruction: return "reconstruction";
        case RecoverySource::DataLost: return "data_lost";
    }
    return "?";
}

// Row layout of the disk array: data track t sits on disk t mod n_data in row
// t div n_data; the two redundancy tracks of each row sit on disks n_data and n_data+1.
class DiskArray {
public:
    DiskArray(std::uint32_t n_tracks, std::uint32_t n_data)
        : n_tracks_(n_tracks), n_data_(n_data), rows_((n_tracks + n_data - 1) / n_data) {
        tracks_.resize(n_tracks);
        for (auto& r : tracks_) r.present = r.valid = true;
        p_valid_.assign(rows_, 1);
        q_valid_.assign(rows_, 1);
        failed_.assign(n_data + ArrayConfig::n_redundancy, 0);
    }

    std::uint32_t n_tracks() const { return n_tracks_; }
    std::uint32_t n_data() const { return n_data_; }
    std::uint32_t n_disks() const { return n_data_ + ArrayConfig::n_redundancy; }
    std::uint32_t rows() const { return rows_; }
    std::uint32_t members_per_row() const { return n_disks(); }

    std::uint32_t disk_of(TrackId t) const { return t % n_data_; }
    std::uint32_t row_of(TrackId t) const { return t / n_data_; }

    // Member k of a row: k < n_data is a data track (absent past the last track),
    // n_data is P, n_data + 1 is Q.
    std::optional<TrackId> data_member(std::uint32_t row, std::uint32_t k) const {
        const std::uint64_t t = std::uint64_t{row} * n_data_ + k;
        if (k >= n_data_ || t >= n_tracks_) return std::nullopt;
        return static_cast<TrackId>(t);
    }
    bool member_exists(std::uint32_t row, std::uint32_t k) const {
        return k >= n_data_ ? k < n_disks() : data_member(row, k).has_value();
    }

    Replica& replica(TrackId t) { return tracks_.at(t); }
    const Replica& replica(TrackId t) const { return tracks_.at(t); }

    bool track_invalid(TrackId t) const {
        const auto& r = tracks_[t];
        return !r.valid || r.has_scope(Mechanism::PsCrc);
    }
    bool member_invalid(std::uint32_t row, std::uint32_t k) const {
        if (k == n_data_) return !p_valid_[row];
        if (k == n_data_ + 1) return !q_valid_[row];
        auto t = data_member(row, k);
        return t && track_invalid(*t);
    }
    void set_member_valid(std::uint32_t row, std::uint32_t k, bool v) {
        if (k == n_data_)
            p_valid_[row] = v;
        else if (k == n_data_ + 1)
            q_valid_[row] = v;
        else if (auto t = data_member(row, k))
            tracks_[*t].valid = v;
    }

    std::uint32_t invalid_members(std::uint32_t row) const {
        std::uint32_t n = 0;
        for (std::uint32_t k = 0; k < n_disks(); ++k) n += member_invalid(row, k);
        return n;
    }

    bool disk_failed(std::uint32_t d) const { return failed_.at(d) != 0; }
    void set_disk_failed(std::uint32_t d, bool f) { failed_.at(d) = f; }

    std::uint64_t faulty_tracks() const {
        std::uint64_t n = 0;
        for (const auto& r : tracks_) n += !r.ledger.empty();
        return n;
    }

private:
    std::uint32_t n_tracks_, n_data_, rows_;
    std::vector<Replica> tracks_;
    std::vector<std::uint8_t> p_valid_, q_valid_;
    std::vector<std::uint8_t> failed_;
};

class Level2Model {
public:
    Level2Model(const Level2Config& cfg, BurstTable bursts, Simulator& sim, Metrics& metrics, RngRegistry& rngs)
        : cfg_(cfg),
          bursts_(std::move(bursts)),
          sim_(sim),
          metrics_(metrics),
          disks_(cfg.n_tracks, cfg.array.n_data),
          rng_burst_(rngs.fork("l2.burst")),
          rng_fe_(rngs.fork("l2.crc.fe")),
          rng_ps_(rngs.fork("l2.crc.ps")),
          rng_cm_(rngs.fork("l2.inject.cm")),
          rng_d_(rngs.fork("l2.inject.d")),
          rng_load_(rngs.fork("l2.inject.load")),
          rng_retry_(rngs.fork("l2.retry")),
          rng_fail_(rngs.fork("l2.permanent")) {
        cfg_.validate();
        for (auto loc : kTransferLocations)
            if (cfg_.faults.transfer_rate_per_h(loc) > 0.0 && !bursts_.has(loc))
                throw ConfigError("no burst table for location " + std::string(location_name(loc)));
        for (std::size_t i = 0; i < kAllLocations.size(); ++i)
            rng_xfer_[i] = rngs.fork("l2.xfer." + std::string(location_name(kAllLocations[i])));
        last_transfer_.fill(0);
        slots_.assign(cfg_.cache.capacity, kNoTrack);
        for (std::uint32_t s = 0; s < cfg_.cache.capacity; ++s) free_slots_.insert(s);
        card_up_.assign(cfg_.cache.cards, 1);
        cci_chan_up_ = cfg_.cache.cci_chan;
        cci_mem_up_ = cfg_.cache.cci_mem;
        busy_until_.assign(cfg_.n_tracks, 0);
    }

    const Level2Config& config() const { return cfg_; }
    DiskArray& disks() { return disks_; }
    const DiskArray& disks() const { return disks_; }
    Metrics& metrics() { return metrics_; }

    // ---- event wiring ----

    // Schedules the stored-data injectors, permanent failures and the periodic flush.
    void start(SimTime end) {
        end_ = end;
        schedule_poisson(cfg_.faults.cache_memory_per_h, rng_cm_, [this] { inject_time_dependent(Location::CacheMemory); });
        schedule_poisson(cfg_.faults.disk_per_h, rng_d_, [this] { inject_time_dependent(Location::Disk); });
        for (std::uint32_t i = 0; i < cfg_.cache.cci_chan; ++i) schedule_failure(ComponentKind::CciChan, i);
        for (std::uint32_t i = 0; i < cfg_.cache.cci_mem; ++i) schedule_failure(ComponentKind::CciMem, i);
        for (std::uint32_t i = 0; i < cfg_.cache.cards; ++i) schedule_failure(ComponentKind::MemoryCard, i);
        for (std::uint32_t d = 0; d < disks_.n_disks(); ++d) schedule_failure(ComponentKind::Disk, d);
        schedule_writeback_timer();
    }

    // Requests for a track that is being reconstructed wait, in arrival order.
    void submit(const TrackRequest& req) {
        const SimTime busy = busy_until_[req.track];
        if (busy > sim_.now()) {
            sim_.schedule(busy, EventKind::RequestArrival, [this, req] { submit(req); });
            return;
        }
        process(req);
    }

    Outcome process(const TrackRequest& req) {
        if (req.track >= cfg_.n_tracks) throw std::out_of_range("track id out of range");
        Outcome o = Outcome::Success;
        switch (req.op) {
            case Op::Read: o = handle_read(req.track); break;
            case Op::FastWrite: o = handle_write(req.track, true); break;
            case Op::WriteThrough: o = handle_write(req.track, false); break;
        }
        metrics_.on_outcome(sim_.now(), req.op, o, req.track);
        return o;
    }

    // Closes any open unavailability interval at the end of the run.
    void finish() {
        if (unavailable_since_ >= 0) {
            metrics_.on_unavailable(unavailable_since_, sim_.now());
            unavailable_since_ = sim_.now();
        }
    }

    // ---- cache operations ----

    Outcome handle_read(TrackId t) {
        if (!interfaces_up()) return Outcome::Unavailable;
        CacheLine* line = find_line(t);
        if (line && !line->vm.valid) {
            touch(*line);
            if (!relocate_from_nvm(*line)) return Outcome::DetectedUncorrected;
            line = find_line(t);
        }
        if (!line) {
            auto staged = stage_in(t);
            if (staged != Outcome::Success) return staged;
            line = find_line(t);
        }
        touch(*line);
        const Outcome o = read_hit(*line);
        if (CacheLine* l = find_line(t)) load_dependent(l->vm, Location::CacheMemory);
        return o;
    }

    Outcome handle_fast_write(TrackId t) { return handle_write(t, true); }
    Outcome handle_write_through(TrackId t) { return handle_write(t, false); }

    Outcome handle_write(TrackId t, bool fast) {
        if (!interfaces_up()) return Outcome::Unavailable;
        std::vector<ErrorEntry> flight;

        inject_transfer(Location::XferChannelToCache, flight);
        if (!flight.empty()) {
            const auto merged = merge(flight, Mechanism::FeCrc);
            const auto out = crc_check(merged, rng_fe_, cfg_.faults.crc_escape);
            metrics_.on_check(sim_.now(), Mechanism::FeCrc, out);
            if (out.result == CheckResult::Detected) {
                resolve_all(flight, Disposition::Detected, Mechanism::FeCrc);
                return Outcome::DetectedUncorrected;
            }
            if (out.result == CheckResult::Missed) metrics_.on_crc_escape(Mechanism::FeCrc);
        }
        inject_transfer(Location::CciChan, flight);
        inject_transfer(Location::Bus1, flight);
        parity_stage(flight);
        inject_transfer(Location::CciMem, flight);
        std::vector<ErrorEntry> nvm_copy = flight;
        inject_transfer(Location::Bus2, flight);
        if (cfg_.faults.edac_on_write) {
            std::vector<ErrorEntry*> refs;
            for (auto& e : flight)
                if (e.scope.has(Mechanism::Edac)) refs.push_back(&e);
            if (!refs.empty()) {
                const auto res = edac_apply(refs, nullptr);
                if (res == CheckResult::Detected) {
                    // The write is retried from the interface buffer.
                    for (auto& e : flight)
                        resolve_transient(e, e.scope.has(Mechanism::Edac) ? Disposition::Detected : Disposition::Overwritten,
                                          Mechanism::Edac);
                    flight.clear();
                    for (auto& e : nvm_copy) e.errs = SymbolErrors(cfg_.geometry);
                } else {
                    drop_empty_transients(flight, Mechanism::Edac);
                }
            }
        }

        CacheLine* line = find_line(t);
        if (line && !line->vm.valid) release_slot(*line);
        if (!line || line->slot == kNoSlot) {
            const auto slot = allocate_slot(t);
            if (!slot) {
                resolve_all(flight, Disposition::Overwritten, std::nullopt);
                return Outcome::Unavailable;
            }
            line = find_line(t);
            if (!line) line = &insert_line(t, *slot);
            else place(*line, *slot);
        }
        touch(*line);
        line->vm.present = line->vm.valid = true;
        overwrite(line->vm);
        for (auto& e : flight) {
            e.scope.clear(Mechanism::Parity);
            add_entry(line->vm, std::move(e));
        }

        if (fast) {
            overwrite(line->nvm);
            line->nvm.present = line->nvm.valid = true;
            for (auto& e : nvm_copy)
                if (!e.errs.empty()) add_entry(line->nvm, propagate(e, MechanismMask{Mechanism::FeCrc}));
            set_dirty(*line, true);
            load_dependent(line->vm, Location::CacheMemory);
            if (static_cast<double>(dirty_.size()) > cfg_.cache.writeback_threshold * cfg_.cache.capacity)
                writeback_flush();
            return Outcome::Success;
        }
        release_nvm(*line);
        set_dirty(*line, false);
        load_dependent(line->vm, Location::CacheMemory);
        return destage(*line);
    }

    // Writes every dirty track to disk in ascending track order; returns the count.
    std::size_t writeback_flush() {
        if (!interfaces_up()) return 0;
        const std::vector<TrackId> todo(dirty_.begin(), dirty_.end());
        std::size_t n = 0;
        for (auto t : todo) {
            CacheLine* line = find_line(t);
            if (!line || !line->dirty) continue;
            destage(*line);
            ++n;
        }
        return n;
    }

    // Evicts the least recently used track (ties to the lowest id), destaging it first if
    // dirty. Returns nothing when the cache is empty.
    std::optional<TrackId> evict_lru() {
        if (lru_.empty()) return std::nullopt;
        const TrackId victim = lru_.begin()->second;
        evict(victim);
        return victim;
    }

    // ---- fault injection ----

    // Stored-data burst into a cache-memory or disk track chosen uniformly. Returns the
    // record id, or nothing when no target replica exists.
    std::optional<RecordId> inject_time_dependent(Location target) {
        RngStream& rng = target == Location::Disk ? rng_d_ : rng_cm_;
        if (target == Location::CacheMemory) {
            if (occupied_.empty()) return std::nullopt;
            const TrackId t = occupied_[rng.uniform_int(0, occupied_.size() - 1)];
            CacheLine& line = *find_line(t);
            Replica* rep = &line.vm;
            if (cfg_.faults.nvm_injection && line.nvm.present && rng.bernoulli(0.5)) rep = &line.nvm;
            if (!rep->valid) return std::nullopt;
            return inject_stored(*rep, Location::CacheMemory, stored_burst_bits(rng), rng);
        }
        auto t = static_cast<TrackId>(rng.uniform_int(0, cfg_.n_tracks - 1));
        if (!disks_.replica(t).valid) {
            // A track on a failed disk has no replica to hit; redirect to a valid one.
            std::vector<TrackId> valid;
            for (TrackId u = 0; u < cfg_.n_tracks; ++u)
                if (disks_.replica(u).valid) valid.push_back(u);
            if (valid.empty()) return std::nullopt;
            t = valid[rng.uniform_int(0, valid.size() - 1)];
        }
        return inject_stored(disks_.replica(t), Location::Disk, stored_burst_bits(rng), rng);
    }

    // Test hook: a burst of exactly `bits` scattered over a stored replica.
    RecordId inject_stored(Replica& rep, Location origin, std::uint64_t bits, RngStream& rng) {
        return inject_footprint(rep, origin, scatter_bits(cfg_.geometry, bits, rng));
    }

    RecordId inject_footprint(Replica& rep, Location origin, SymbolErrors errs) {
        ErrorEntry e;
        e.origin = origin;
        e.injected_at = sim_.now();
        e.errs = std::move(errs);
        e.scope = scope_of(origin);
        e.id = metrics_.inject(sim_.now(), origin, e.errs, false);
        const RecordId id = e.id;
        add_entry(rep, std::move(e));
        return id;
    }

    std::uint64_t stored_burst_bits(RngStream& rng) {
        const double draw = std::round(rng.normal(cfg_.faults.burst_mean_bits, cfg_.faults.burst_sd_bits));
        const double hi = static_cast<double>(cfg_.geometry.record_bits());
        return static_cast<std::uint64_t>(std::clamp(draw, 1.0, hi));
    }

    // One access of `rep` may plant a latent burst, with probability bits x rate.
    std::optional<RecordId> load_dependent(Replica& rep, Location origin) {
        const double p = static_cast<double>(cfg_.geometry.record_bits()) * cfg_.faults.load_per_bit;
        if (p <= 0.0 || !rep.valid) return std::nullopt;
        if (!rng_load_.bernoulli(p)) return std::nullopt;
        ++load_injections_;
        return inject_stored(rep, origin, stored_burst_bits(rng_load_), rng_load_);
    }
    std::uint64_t load_injections() const { return load_injections_; }

    // Test hook: the next transfer through `loc` carries a burst of `bits` flips.
    void script_transfer_fault(Location loc, std::uint64_t bits) { scripted_[loc].push_back(bits); }
    // Test hook: the next transfer through `loc` carries exactly this footprint.
    void script_transfer_footprint(Location loc, SymbolErrors errs) { scripted_fp_[loc].push_back(std::move(errs)); }

    // ---- permanent faults ----

    void fail_component(ComponentKind kind, std::uint32_t id) {
        switch (kind) {
            case ComponentKind::CciChan:
            case ComponentKind::CciMem: {
                auto& up = kind == ComponentKind::CciChan ? cci_chan_up_ : cci_mem_up_;
                const bool was_up = interfaces_up();
                if (up > 0) --up;
                if (was_up && !interfaces_up()) unavailable_since_ = sim_.now();
                break;
            }
            case ComponentKind::MemoryCard: fail_card(id); break;
            case ComponentKind::Disk: fail_disk(id); break;
        }
    }

    void repair_component(ComponentKind kind, std::uint32_t id) {
        switch (kind) {
            case ComponentKind::CciChan:
            case ComponentKind::CciMem: {
                auto& up = kind == ComponentKind::CciChan ? cci_chan_up_ : cci_mem_up_;
                const auto total = kind == ComponentKind::CciChan ? cfg_.cache.cci_chan : cfg_.cache.cci_mem;
                const bool was_up = interfaces_up();
                if (up < total) ++up;
                if (!was_up && interfaces_up()) {
                    metrics_.on_unavailable(unavailable_since_, sim_.now());
                    unavailable_since_ = -1;
                }
                break;
            }
            case ComponentKind::MemoryCard: card_up_.at(id) = 1; break;
            case ComponentKind::Disk: break;
        }
    }

    bool interfaces_up() const { return cci_chan_up_ > 0 && cci_mem_up_ > 0; }
    bool card_up(std::uint32_t c) const { return card_up_.at(c) != 0; }

    // Runs the hot-spare rebuild of disk `d` to completion, one reconstructed track per
    // reconstruction service time.
    void start_rebuild(std::uint32_t d) { rebuild_step(d, 0); }

    // ---- recovery ----

    // The row is recoverable iff at most two of its members are invalid. On success all
    // invalid members are restored; each costs one reconstruction service time.
    bool reconstruct_row(std::uint32_t row) {
        const auto n_members = disks_.members_per_row();
        std::vector<std::uint32_t> bad;
        for (std::uint32_t k = 0; k < n_members; ++k)
            if (disks_.member_invalid(row, k)) bad.push_back(k);
        if (bad.size() > ArrayConfig::n_redundancy) return false;
        SimTime cursor = sim_.now();
        for (auto k : bad) {
            cursor += cfg_.array.reconstruct_time;
            if (auto t = disks_.data_member(row, k)) {
                Replica& rep = disks_.replica(*t);
                // Errors that predate the redundancy computation are rebuilt as they were.
                resolve_where(rep, [](const ErrorEntry& e) { return e.scope.has(Mechanism::PsCrc); },
                              Disposition::Detected, Mechanism::PsCrc);
                busy_until_[*t] = std::max(busy_until_[*t], cursor);
            }
            disks_.set_member_valid(row, k, true);
        }
        if (!bad.empty()) metrics_.on_reconstruction(sim_.now(), bad.size());
        return true;
    }

    // Recovery sequence after an uncorrectable detection on a cache read. The caller
    // has already resolved the stored VM records.
    RecoverySource recover_track_read(CacheLine& line) {
        const TrackId t = line.track;
        if (line.nvm.present && line.nvm.valid && line.nvm.clean()) {
            rewrite_vm_from(line, line.nvm);
            return RecoverySource::Nvm;
        }
        if (!line.dirty) {
            Replica& disk = disks_.replica(t);
            const auto row = disks_.row_of(t);
            if (disk.valid) {
                if (disk.clean()) {
                    rewrite_vm_from(line, disk);
                    return RecoverySource::Disk;
                }
                // Errors written with a good PS-CRC are caught again at the host.
                if (!disk.has_scope(Mechanism::PsCrc)) return RecoverySource::DataLost;
                const auto out = crc_check(merge(disk.ledger, Mechanism::PsCrc), rng_ps_, cfg_.faults.crc_escape);
                metrics_.on_check(sim_.now(), Mechanism::PsCrc, out);
                if (out.result == CheckResult::Missed) {
                    metrics_.on_crc_escape(Mechanism::PsCrc);
                    rewrite_vm_from(line, disk);
                    return RecoverySource::Disk;
                }
            }
            if (reconstruct_row(row) && disks_.replica(t).clean()) {
                rewrite_vm_from(line, disks_.replica(t));
                return RecoverySource::Reconstruction;
            }
        }
        return RecoverySource::DataLost;
    }

    // ---- state inspection ----

    CacheLine* find_line(TrackId t) {
        auto it = lines_.find(t);
        return it == lines_.end() ? nullptr : &it->second;
    }
    std::size_t resident() const { return lines_.size(); }
    std::size_t dirty_count() const { return dirty_.size(); }
    const std::set<TrackId>& dirty_tracks() const { return dirty_; }
    const std::set<std::pair<SimTime, TrackId>>& lru_order() const { return lru_; }
    SimTime busy_until(TrackId t) const { return busy_until_.at(t); }

    double cache_faulty_fraction() const {
        if (lines_.empty()) return 0.0;
        std::size_t n = 0;
        for (const auto& [_, l] : lines_) n += !l.vm.ledger.empty();
        return static_cast<double>(n) / static_cast<double>(lines_.size());
    }
    double disk_faulty_fraction() const {
        return static_cast<double>(disks_.faulty_tracks()) / static_cast<double>(cfg_.n_tracks);
    }
    double dirty_fraction() const { return static_cast<double>(dirty_.size()) / cfg_.cache.capacity; }

    // Every pending record must still be carried by some replica ledger.
    bool ledgers_consistent() const {
        std::set<RecordId> live;
        auto collect = [&](const Replica& r) {
            for (const auto& e : r.ledger) live.insert(e.id);
        };
        for (const auto& [_, l] : lines_) {
            collect(l.vm);
            collect(l.nvm);
        }
        for (TrackId t = 0; t < cfg_.n_tracks; ++t) collect(disks_.replica(t));
        for (const auto& r : metrics_.records())
            if ((r.disposition == Disposition::Pending) != (live.count(r.id) != 0)) return false;
        return true;
    }

private:
    static constexpr TrackId kNoTrack = ~TrackId{0};
    static constexpr std::uint32_t kNoSlot = ~std::uint32_t{0};

    // ---- ledgers ----

    void add_entry(Replica& rep, ErrorEntry e) {
        if (e.errs.empty()) {
            metrics_.resolve(e.id, Disposition::Overwritten, std::nullopt, sim_.now(), e.injected_at);
            return;
        }
        if (rep.ledger.empty()) rep.first_error = e.injected_at;
        rep.first_error = std::min(rep.first_error, e.injected_at);
        rep.ledger.push_back(std::move(e));
    }

    void resolve_stored(Replica& rep, const ErrorEntry& e, Disposition d, std::optional<Mechanism> m) {
        metrics_.resolve(e.id, d, m, sim_.now(), rep.first_error >= 0 ? rep.first_error : e.injected_at);
    }

    void resolve_transient(const ErrorEntry& e, Disposition d, std::optional<Mechanism> m) {
        metrics_.resolve(e.id, d, m, sim_.now(), e.injected_at);
    }

    void resolve_all(std::vector<ErrorEntry>& flight, Disposition d, std::optional<Mechanism> m) {
        for (const auto& e : flight) resolve_transient(e, d, m);
        flight.clear();
    }

    // After a detection by `m` the data is replaced: entries `m` could see are credited
    // to it, the rest are simply gone.
    void resolve_detected(std::vector<ErrorEntry>& flight, Mechanism m) {
        for (const auto& e : flight)
            e.scope.has(m) ? resolve_transient(e, Disposition::Detected, m)
                           : resolve_transient(e, Disposition::Overwritten, std::nullopt);
        flight.clear();
    }
    void resolve_detected(Replica& rep, Mechanism m) {
        resolve_where(rep, [m](const ErrorEntry& e) { return e.scope.has(m); }, Disposition::Detected, m);
        clear_replica(rep, Disposition::Overwritten, std::nullopt);
    }

    template <typename Pred>
    void resolve_where(Replica& rep, Pred pred, Disposition d, std::optional<Mechanism> m) {
        for (const auto& e : rep.ledger)
            if (pred(e)) resolve_stored(rep, e, d, m);
        std::erase_if(rep.ledger, pred);
        if (rep.ledger.empty()) rep.first_error = -1;
    }

    void clear_replica(Replica& rep, Disposition d, std::optional<Mechanism> m) {
        resolve_where(rep, [](const ErrorEntry&) { return true; }, d, m);
    }

    // A full-track write: the old contents, errors included, are gone.
    void overwrite(Replica& rep) { clear_replica(rep, Disposition::Overwritten, std::nullopt); }

    ErrorEntry propagate(const ErrorEntry& src, MechanismMask scope) {
        ErrorEntry e;
        e.origin = src.origin;
        e.injected_at = src.injected_at;
        e.errs = src.errs;
        e.scope = scope;
        e.id = metrics_.inject(sim_.now(), src.origin, e.errs, true);
        return e;
    }

    // Copies of `src` entries that will live in a new replica; only the frontend CRC can
    // still see them.
    void copy_ledger(const Replica& src, Replica& dst) {
        for (const auto& e : src.ledger) add_entry(dst, propagate(e, MechanismMask{Mechanism::FeCrc}));
    }

    SymbolErrors merge(const std::vector<ErrorEntry>& entries, Mechanism m) const {
        SymbolErrors out(cfg_.geometry);
        for (const auto& e : entries)
            if (e.scope.has(m)) out.merge(e.errs);
        return out;
    }

    // EDAC over the given entries (stored and in flight). Corrected symbols are removed
    // from every entry that holds them; entries left empty are resolved as corrected.
    CheckResult edac_apply(std::vector<ErrorEntry*>& refs, Replica* stored) {
        SymbolErrors merged(cfg_.geometry);
        for (auto* e : refs) merged.merge(e->errs);
        const auto res = edac_check(merged);
        metrics_.on_check(sim_.now(), Mechanism::Edac, res.outcome);
        if (res.outcome.corrected_symbols) {
            for (auto* e : refs) {
                e->errs.erase_if([&](std::uint16_t s) { return merged.count(s) && !res.after.count(s); });
            }
        }
        if (stored)
            resolve_where(*stored, [](const ErrorEntry& e) { return e.errs.empty(); }, Disposition::Corrected,
                          Mechanism::Edac);
        return res.outcome.result;
    }

    void drop_empty_transients(std::vector<ErrorEntry>& flight, Mechanism m) {
        for (const auto& e : flight)
            if (e.errs.empty()) resolve_transient(e, Disposition::Corrected, m);
        std::erase_if(flight, [](const ErrorEntry& e) { return e.errs.empty(); });
    }

    // ---- transfer faults ----

    void inject_transfer(Location loc, std::vector<ErrorEntry>& flight) {
        const auto idx = static_cast<std::size_t>(loc);
        SymbolErrors errs(cfg_.geometry);
        if (auto it = scripted_fp_.find(loc); it != scripted_fp_.end() && !it->second.empty()) {
            errs.merge(it->second.front());
            it->second.erase(it->second.begin());
        }
        if (auto it = scripted_.find(loc); it != scripted_.end() && !it->second.empty()) {
            errs.merge(scatter_bits(cfg_.geometry, it->second.front(), rng_burst_));
            it->second.erase(it->second.begin());
        }
        const double rate_per_ns = cfg_.faults.transfer_rate_per_h(loc) / static_cast<double>(kHour);
        if (rate_per_ns > 0.0) {
            double mean = 0.0;
            if (cfg_.faults.transfer_mode == TransferFaultMode::Latch) {
                mean = rate_per_ns * static_cast<double>(sim_.now() - last_transfer_[idx]);
                last_transfer_[idx] = sim_.now();
            } else {
                mean = rate_per_ns * static_cast<double>(transfer_duration(loc));
            }
            const auto k = rng_xfer_[idx].poisson(mean);
            for (std::uint64_t i = 0; i < k; ++i) {
                const std::uint64_t bits = bursts_.has(loc) ? bursts_.sample(loc, rng_burst_) : stored_burst_bits(rng_burst_);
                errs.merge(scatter_bits(cfg_.geometry, bits, rng_burst_));
            }
        }
        if (errs.empty()) return;
        ErrorEntry e;
        e.origin = loc;
        e.injected_at = sim_.now();
        e.errs = std::move(errs);
        e.scope = scope_of(loc);
        e.id = metrics_.inject(sim_.now(), loc, e.errs, false);
        flight.push_back(std::move(e));
    }

    SimTime transfer_duration(Location loc) const {
        switch (loc) {
            case Location::XferChannelToCache:
            case Location::XferCacheToDisk: return cfg_.timing.stage_duration(Location::Bus1, cfg_.geometry);
            default: return cfg_.timing.stage_duration(loc, cfg_.geometry);
        }
    }

    // Parity at the end of Bus 1. A detection makes the interface retry the transfer:
    // the transients in flight are gone, stored errors come back unchanged.
    void parity_stage(std::vector<ErrorEntry>& flight) {
        const auto merged = merge(flight, Mechanism::Parity);
        if (merged.empty()) return;
        const auto out = parity_check(merged);
        metrics_.on_check(sim_.now(), Mechanism::Parity, out);
        if (out.result == CheckResult::Detected) {
            for (const auto& e : flight) {
                const bool odd = e.scope.has(Mechanism::Parity) &&
                                 std::any_of(e.errs.entries().begin(), e.errs.entries().end(),
                                             [](const auto& p) { return p.second % 2 == 1; });
                resolve_transient(e, odd ? Disposition::Detected : Disposition::Overwritten,
                                  odd ? std::optional<Mechanism>(Mechanism::Parity) : std::nullopt);
            }
            flight.clear();
            return;
        }
        for (auto& e : flight) e.scope.clear(Mechanism::Parity);
    }

    // ---- data paths ----

    // Cache -> host for a resident, valid track.
    Outcome read_hit(CacheLine& line) {
        Replica& vm = line.vm;
        std::vector<ErrorEntry> flight;
        inject_transfer(Location::Bus2, flight);

        std::vector<ErrorEntry*> refs;
        for (auto& e : vm.ledger)
            if (e.scope.has(Mechanism::Edac)) refs.push_back(&e);
        for (auto& e : flight)
            if (e.scope.has(Mechanism::Edac)) refs.push_back(&e);
        if (!refs.empty()) {
            const auto res = edac_apply(refs, &vm);
            drop_empty_transients(flight, Mechanism::Edac);
            if (res == CheckResult::Detected) return recover(line, flight, Mechanism::Edac);
        }
        for (auto& e : flight) e.scope.clear(Mechanism::Edac);

        inject_transfer(Location::CciMem, flight);
        inject_transfer(Location::Bus1, flight);
        parity_stage(flight);
        inject_transfer(Location::CciChan, flight);

        SymbolErrors merged = merge(flight, Mechanism::FeCrc);
        for (const auto& e : vm.ledger) merged.merge(e.errs);
        if (merged.empty()) {
            resolve_all(flight, Disposition::Overwritten, std::nullopt);
            return Outcome::Success;
        }
        const auto out = crc_check(merged, rng_fe_, cfg_.faults.crc_escape);
        metrics_.on_check(sim_.now(), Mechanism::FeCrc, out);
        if (out.result == CheckResult::Detected) return recover(line, flight, Mechanism::FeCrc);
        metrics_.on_crc_escape(Mechanism::FeCrc);
        resolve_all(flight, Disposition::EscapedToHost, std::nullopt);
        clear_replica(vm, Disposition::EscapedToHost, std::nullopt);
        return Outcome::Undetected;
    }

    Outcome recover(CacheLine& line, std::vector<ErrorEntry>& flight, Mechanism m) {
        resolve_detected(flight, m);
        // Re-reading helps only if the error was in flight; stored errors persist.
        if (line.vm.clean() || rng_retry_.bernoulli(cfg_.faults.retry_success_p)) return Outcome::Success;
        resolve_detected(line.vm, m);
        const auto src = recover_track_read(line);
        if (src != RecoverySource::DataLost) return Outcome::Success;
        metrics_.on_data_loss(sim_.now());
        drop_line(line, Disposition::Overwritten);
        return Outcome::DetectedUncorrected;
    }

    void rewrite_vm_from(CacheLine& line, const Replica& src) {
        overwrite(line.vm);
        copy_ledger(src, line.vm);
    }

    // Disk -> cache on a miss.
    Outcome stage_in(TrackId t) {
        const auto row = disks_.row_of(t);
        Replica& disk = disks_.replica(t);
        if (!disk.valid && !reconstruct_row(row)) return Outcome::Unavailable;
        if (disk.has_scope(Mechanism::PsCrc)) {
            const auto out = crc_check(merge(disk.ledger, Mechanism::PsCrc), rng_ps_, cfg_.faults.crc_escape);
            metrics_.on_check(sim_.now(), Mechanism::PsCrc, out);
            if (out.result == CheckResult::Detected) {
                if (!reconstruct_row(row)) return Outcome::DetectedUncorrected;
            } else {
                metrics_.on_crc_escape(Mechanism::PsCrc);
            }
        }
        const auto slot = allocate_slot(t);
        if (!slot) return Outcome::Unavailable;
        CacheLine& line = insert_line(t, *slot);
        touch(line);

        std::vector<ErrorEntry> flight;
        inject_transfer(Location::CciChan, flight);
        inject_transfer(Location::Bus1, flight);
        parity_stage(flight);
        inject_transfer(Location::CciMem, flight);
        inject_transfer(Location::Bus2, flight);

        line.vm.present = line.vm.valid = true;
        copy_ledger(disk, line.vm);
        for (auto& e : flight) add_entry(line.vm, std::move(e));
        load_dependent(disk, Location::Disk);
        return Outcome::Success;
    }

    // Cache -> disk for one track. Clears the dirty flag and releases the NVM copy.
    Outcome destage(CacheLine& line) {
        const TrackId t = line.track;
        const auto row = disks_.row_of(t);
        // The redundancy of a row with more invalid members than it tolerates cannot be
        // updated; the track stays dirty in the cache.
        if (disks_.invalid_members(row) > ArrayConfig::n_redundancy) return Outcome::Unavailable;

        Replica* src = line.vm.valid ? &line.vm : (line.nvm.present ? &line.nvm : nullptr);
        if (!src) return lose_dirty(line, Outcome::DetectedUncorrected);

        std::vector<ErrorEntry> flight;
        inject_transfer(Location::Bus2, flight);
        std::vector<ErrorEntry*> refs;
        if (src == &line.vm)
            for (auto& e : line.vm.ledger)
                if (e.scope.has(Mechanism::Edac)) refs.push_back(&e);
        for (auto& e : flight)
            if (e.scope.has(Mechanism::Edac)) refs.push_back(&e);
        if (!refs.empty()) {
            const auto res = edac_apply(refs, src == &line.vm ? &line.vm : nullptr);
            drop_empty_transients(flight, Mechanism::Edac);
            if (res == CheckResult::Detected) {
                resolve_detected(flight, Mechanism::Edac);
                resolve_detected(line.vm, Mechanism::Edac);
                if (line.nvm.present && line.nvm.clean()) {
                    rewrite_vm_from(line, line.nvm);
                    src = &line.vm;
                } else {
                    return lose_dirty(line, Outcome::DetectedUncorrected);
                }
            }
        }
        for (auto& e : flight) e.scope.clear(Mechanism::Edac);
        inject_transfer(Location::CciMem, flight);
        inject_transfer(Location::Bus1, flight);
        parity_stage(flight);
        inject_transfer(Location::CciChan, flight);
        inject_transfer(Location::XferCacheToDisk, flight);

        Replica& disk = disks_.replica(t);
        overwrite(disk);
        disk.present = disk.valid = true;
        copy_ledger(*src, disk);
        for (auto& e : flight) {
            if (e.origin != Location::XferCacheToDisk) e.scope = MechanismMask{Mechanism::FeCrc};
            add_entry(disk, std::move(e));
        }
        release_nvm(line);
        set_dirty(line, false);
        load_dependent(disk, Location::Disk);
        if (!line.vm.valid) drop_line(line, Disposition::Overwritten);
        return Outcome::Success;
    }

    Outcome lose_dirty(CacheLine& line, Outcome o) {
        metrics_.on_data_loss(sim_.now());
        release_nvm(line);
        set_dirty(line, false);
        if (!line.vm.valid) drop_line(line, Disposition::Overwritten);
        return o;
    }

    // Moves a track whose memory card failed back into a healthy slot from its NVM copy.
    bool relocate_from_nvm(CacheLine& line) {
        const TrackId t = line.track;
        if (!line.nvm.present) {
            if (line.dirty) metrics_.on_data_loss(sim_.now());
            drop_line(line, Disposition::Overwritten);
            return false;
        }
        release_slot(line);
        const auto slot = allocate_slot(t);
        CacheLine* l = find_line(t);
        if (!slot) {
            metrics_.on_data_loss(sim_.now());
            drop_line(*l, Disposition::Overwritten);
            return false;
        }
        place(*l, *slot);
        l->vm.present = l->vm.valid = true;
        rewrite_vm_from(*l, l->nvm);
        return true;
    }

    // ---- cache directory ----

    CacheLine& insert_line(TrackId t, std::uint32_t slot) {
        CacheLine& line = lines_[t];
        line.track = t;
        line.slot = kNoSlot;
        line.lru_stamp = sim_.now();
        lru_.insert({line.lru_stamp, t});
        place(line, slot);
        return line;
    }

    void place(CacheLine& line, std::uint32_t slot) {
        free_slots_.erase(slot);
        slots_[slot] = line.track;
        line.slot = slot;
        occupied_index_[line.track] = occupied_.size();
        occupied_.push_back(line.track);
    }

    void release_slot(CacheLine& line) {
        if (line.slot == kNoSlot) return;
        slots_[line.slot] = kNoTrack;
        free_slots_.insert(line.slot);
        line.slot = kNoSlot;
        const auto idx = occupied_index_.at(line.track);
        const TrackId last = occupied_.back();
        occupied_[idx] = last;
        occupied_index_[last] = idx;
        occupied_.pop_back();
        occupied_index_.erase(line.track);
    }

    void touch(CacheLine& line) {
        lru_.erase({line.lru_stamp, line.track});
        line.lru_stamp = sim_.now();
        lru_.insert({line.lru_stamp, line.track});
    }

    void set_dirty(CacheLine& line, bool d) {
        line.dirty = d;
        if (d)
            dirty_.insert(line.track);
        else
            dirty_.erase(line.track);
    }

    void release_nvm(CacheLine& line) {
        overwrite(line.nvm);
        line.nvm.present = line.nvm.valid = false;
    }

    void drop_line(CacheLine& line, Disposition d) {
        clear_replica(line.vm, d, std::nullopt);
        clear_replica(line.nvm, d, std::nullopt);
        set_dirty(line, false);
        release_slot(line);
        lru_.erase({line.lru_stamp, line.track});
        lines_.erase(line.track);
    }

    void evict(TrackId victim) {
        CacheLine& line = *find_line(victim);
        if (line.dirty && destage(line) != Outcome::Success && find_line(victim)) metrics_.on_data_loss(sim_.now());
        if (CacheLine* l = find_line(victim)) drop_line(*l, Disposition::Overwritten);
    }

    std::uint32_t card_of(std::uint32_t slot) const { return slot % cfg_.cache.cards; }
    std::uint32_t nvm_card_of(std::uint32_t slot) const { return (slot + 1) % cfg_.cache.cards; }

    std::optional<std::uint32_t> free_healthy_slot() const {
        for (auto s : free_slots_)
            if (card_up_[card_of(s)]) return s;
        return std::nullopt;
    }

    // Finds a usable slot for `t`, evicting LRU tracks as needed. `t` itself is never
    // chosen as a victim.
    std::optional<std::uint32_t> allocate_slot(TrackId t) {
        while (true) {
            if (auto s = free_healthy_slot()) return s;
            auto it = lru_.begin();
            while (it != lru_.end() && it->second == t) ++it;
            if (it == lru_.end()) return std::nullopt;
            if (it == lru_.begin()) {
                evict_lru();
            } else {
                // The oldest line is the requester itself; evict the next one.
                evict(it->second);
            }
        }
    }

    // ---- permanent failures ----

    void fail_card(std::uint32_t c) {
        if (!card_up_.at(c)) return;
        card_up_[c] = 0;
        std::vector<TrackId> hit;
        for (std::uint32_t s = 0; s < slots_.size(); ++s)
            if (slots_[s] != kNoTrack && (card_of(s) == c || nvm_card_of(s) == c)) hit.push_back(slots_[s]);
        for (auto t : hit) {
            CacheLine* line = find_line(t);
            if (!line) continue;
            const bool vm_lost = card_of(line->slot) == c;
            const bool nvm_lost = nvm_card_of(line->slot) == c && line->nvm.present;
            if (nvm_lost) {
                overwrite(line->nvm);
                line->nvm.present = line->nvm.valid = false;
            }
            if (!vm_lost) continue;
            if (!line->dirty) {
                drop_line(*line, Disposition::Overwritten);
            } else if (!line->nvm.present) {
                metrics_.on_data_loss(sim_.now());
                drop_line(*line, Disposition::Overwritten);
            } else {
                overwrite(line->vm);
                line->vm.valid = false;
            }
        }
    }

    void fail_disk(std::uint32_t d) {
        if (disks_.disk_failed(d)) return;
        disks_.set_disk_failed(d, true);
        for (std::uint32_t row = 0; row < disks_.rows(); ++row) {
            if (!disks_.member_exists(row, d)) continue;
            if (auto t = disks_.data_member(row, d)) overwrite(disks_.replica(*t));
            disks_.set_member_valid(row, d, false);
        }
        start_rebuild(d);
    }

    void rebuild_step(std::uint32_t d, std::uint32_t row) {
        for (; row < disks_.rows(); ++row) {
            if (!disks_.member_exists(row, d) || !disks_.member_invalid(row, d)) continue;
            const SimTime before = sim_.now();
            if (!reconstruct_row(row)) {
                // Unrecoverable row: the member is rebuilt from nothing.
                metrics_.on_data_loss(sim_.now());
                if (auto t = disks_.data_member(row, d)) overwrite(disks_.replica(*t));
                disks_.set_member_valid(row, d, true);
            }
            const SimTime next = before + cfg_.array.reconstruct_time;
            if (next > sim_.now() && next <= end_) {
                sim_.schedule(next, EventKind::RebuildStep, [this, d, row] { rebuild_step(d, row + 1); });
                return;
            }
        }
        disks_.set_disk_failed(d, false);
        if (end_ > 0) schedule_failure(ComponentKind::Disk, d);
    }

    // ---- scheduling ----

    // now + delay_ns, saturating past the horizon; long mean intervals exceed int64 ns.
    SimTime after(double delay_ns) const {
        const double remaining = static_cast<double>(end_ - sim_.now());
        if (delay_ns > remaining) return end_ + 1;
        return sim_.now() + static_cast<SimTime>(delay_ns);
    }

    template <typename F>
    void schedule_poisson(double per_h, RngStream& rng, F fire) {
        if (per_h <= 0.0) return;
        const double mean_ns = static_cast<double>(kHour) / per_h;
        const SimTime at = after(std::max(1.0, rng.exponential(mean_ns)));
        if (at > end_) return;
        sim_.schedule(at, EventKind::FaultInjection, [this, per_h, &rng, fire] {
            fire();
            schedule_poisson(per_h, rng, fire);
        });
    }

    void schedule_failure(ComponentKind kind, std::uint32_t id) {
        const double rate = kind == ComponentKind::Disk ? cfg_.faults.disk_permanent_per_h
                                                        : cfg_.faults.cache_component_per_h;
        if (rate <= 0.0) return;
        const SimTime at = after(rng_fail_.exponential(static_cast<double>(kHour) / rate));
        if (at > end_) return;
        sim_.schedule(at, EventKind::ComponentFailure, [this, kind, id] {
            fail_component(kind, id);
            if (kind == ComponentKind::Disk) return;  // the rebuild reschedules
            const SimTime rep = after(rng_fail_.exponential(cfg_.faults.repair_mean_h * kHour));
            if (rep > end_) return;
            sim_.schedule(rep, EventKind::RepairCompletion, [this, kind, id] {
                repair_component(kind, id);
                schedule_failure(kind, id);
            });
        });
    }

    void schedule_writeback_timer() {
        const SimTime at = sim_.now() + cfg_.cache.writeback_period;
        if (at > end_) return;
        sim_.schedule(at, EventKind::WritebackTimer, [this] {
            writeback_flush();
            schedule_writeback_timer();
        });
    }

    Level2Config cfg_;
    BurstTable bursts_;
    Simulator& sim_;
    Metrics& metrics_;
    DiskArray disks_;

    RngStream rng_burst_, rng_fe_, rng_ps_, rng_cm_, rng_d_, rng_load_, rng_retry_, rng_fail_;
    std::array<RngStream, 8> rng_xfer_;
    std::array<SimTime, 8> last_transfer_{};
    std::map<Location, std::vector<std::uint64_t>> scripted_;
    std::map<Location, std::vector<SymbolErrors>> scripted_fp_;

    std::unordered_map<TrackId, CacheLine> lines_;
    std::set<std::pair<SimTime, TrackId>> lru_;
    std::set<TrackId> dirty_;
    std::vector<TrackId> slots_;
    std::set<std::uint32_t> free_slots_;
    std::vector<TrackId> occupied_;
    std::unordered_map<TrackId, std::size_t> occupied_index_;
    std::vector<std::uint8_t> card_up_;
    std::uint32_t cci_chan_up_ = 0, cci_mem_up_ = 0;
    SimTime unavailable_since_ = -1;
    std::vector<SimTime> busy_until_;
    std::uint64_t load_injections_ = 0;
    SimTime end_ = 0;
};

}  // namespace dependasim
