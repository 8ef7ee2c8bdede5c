#pragma once

// Behavioural evaluators for the four data-path detection mechanisms. Nothing here
// computes check bits: each evaluator compares per-symbol error counts against the
// mechanism's detection condition.
//
//   mechanism  unit     condition for guaranteed detection
//   parity     symbol   odd number of bit errors in the symbol
//   EDAC       symbol   1-2 errors corrected, 3 detected, 4+ missed
//   FE/PS-CRC  record   1-3 symbols in error; beyond that, escape with p_escape

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dependasim/error.hpp"
#include "dependasim/kernel.hpp"

namespace dependasim {

struct Geometry {
    std::uint32_t symbols_per_record = 1024;
    std::uint32_t bits_per_symbol = 256;

    std::uint64_t record_bits() const { return std::uint64_t{symbols_per_record} * bits_per_symbol; }
    bool operator==(const Geometry&) const = default;

    void validate() const {
        if (symbols_per_record == 0 || symbols_per_record > 65535)
            throw ConfigError("geometry.symbols_per_track must be in [1, 65535]");
        if (bits_per_symbol == 0 || bits_per_symbol > 65535)
            throw ConfigError("geometry.bits_per_symbol must be in [1, 65535]");
    }
};

// Sparse per-symbol bit-error counts for one record (track).
class SymbolErrors {
public:
    using Entry = std::pair<std::uint16_t, std::uint16_t>;  // symbol, count

    SymbolErrors() = default;
    explicit SymbolErrors(Geometry g) : geom_(g) {}

    const Geometry& geometry() const { return geom_; }

    // Adds flips to a symbol; the count saturates at bits_per_symbol.
    void add(std::uint32_t symbol, std::uint32_t flips) {
        if (flips == 0) return;
        check_symbol(symbol);
        auto it = lower(symbol);
        if (it != entries_.end() && it->first == symbol) {
            it->second = cap(std::uint32_t{it->second} + flips);
        } else {
            entries_.insert(it, Entry{static_cast<std::uint16_t>(symbol), cap(flips)});
        }
    }

    void set(std::uint32_t symbol, std::uint32_t count) {
        check_symbol(symbol);
        auto it = lower(symbol);
        const bool found = it != entries_.end() && it->first == symbol;
        if (count == 0) {
            if (found) entries_.erase(it);
        } else if (found) {
            it->second = cap(count);
        } else {
            entries_.insert(it, Entry{static_cast<std::uint16_t>(symbol), cap(count)});
        }
    }

    std::uint32_t count(std::uint32_t symbol) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), symbol,
                                   [](const Entry& e, std::uint32_t s) { return e.first < s; });
        return it != entries_.end() && it->first == symbol ? it->second : 0;
    }

    void merge(const SymbolErrors& other) {
        if (other.entries_.empty()) return;
        if (entries_.empty()) {
            entries_ = other.entries_;
            return;
        }
        std::vector<Entry> out;
        out.reserve(entries_.size() + other.entries_.size());
        auto a = entries_.begin();
        auto b = other.entries_.begin();
        while (a != entries_.end() || b != other.entries_.end()) {
            if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
                out.push_back(*a++);
            } else if (a == entries_.end() || b->first < a->first) {
                out.push_back(*b++);
            } else {
                out.emplace_back(a->first, cap(std::uint32_t{a->second} + b->second));
                ++a;
                ++b;
            }
        }
        entries_ = std::move(out);
    }

    // Drops every symbol for which pred(symbol) is true.
    template <typename Pred>
    void erase_if(Pred pred) {
        std::erase_if(entries_, [&](const Entry& e) { return pred(e.first); });
    }

    bool empty() const { return entries_.empty(); }
    std::size_t symbols_in_error() const { return entries_.size(); }
    std::uint64_t total_bits() const {
        std::uint64_t n = 0;
        for (const auto& e : entries_) n += e.second;
        return n;
    }
    const std::vector<Entry>& entries() const { return entries_; }

    bool operator==(const SymbolErrors& o) const { return geom_ == o.geom_ && entries_ == o.entries_; }

private:
    std::vector<Entry>::iterator lower(std::uint32_t symbol) {
        return std::lower_bound(entries_.begin(), entries_.end(), symbol,
                                [](const Entry& e, std::uint32_t s) { return e.first < s; });
    }
    void check_symbol(std::uint32_t symbol) const {
        if (symbol >= geom_.symbols_per_record)
            throw std::out_of_range("symbol index " + std::to_string(symbol) + " >= " +
                                    std::to_string(geom_.symbols_per_record));
    }
    std::uint16_t cap(std::uint32_t n) const {
        return static_cast<std::uint16_t>(std::min<std::uint32_t>(n, geom_.bits_per_symbol));
    }

    Geometry geom_;
    std::vector<Entry> entries_;
};

// Flips `n_bits` distinct bit positions chosen uniformly over the whole record.
inline SymbolErrors scatter_bits(Geometry g, std::uint64_t n_bits, RngStream& rng) {
    SymbolErrors out(g);
    const std::uint64_t total = g.record_bits();
    n_bits = std::min(n_bits, total);
    if (n_bits == 0) return out;
    std::vector<std::uint64_t> bits;
    if (n_bits * 8 > total) {
        // Dense: Floyd's sampling over a bitmap.
        std::vector<bool> chosen(total);
        for (std::uint64_t j = total - n_bits; j < total; ++j) {
            const std::uint64_t t = rng.uniform_int(0, j);
            chosen[chosen[t] ? j : t] = true;
        }
        for (std::uint64_t b = 0; b < total; ++b)
            if (chosen[b]) bits.push_back(b);
    } else {
        bits.reserve(n_bits);
        while (bits.size() < n_bits) {
            for (auto need = n_bits - bits.size(); need > 0; --need) bits.push_back(rng.uniform_int(0, total - 1));
            std::sort(bits.begin(), bits.end());
            bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
        }
    }
    for (auto b : bits) out.add(static_cast<std::uint32_t>(b / g.bits_per_symbol), 1);
    return out;
}

enum class Mechanism : std::uint8_t { Parity = 0, Edac = 1, FeCrc = 2, PsCrc = 3 };
inline constexpr std::array<Mechanism, 4> kAllMechanisms = {Mechanism::Parity, Mechanism::Edac, Mechanism::FeCrc,
                                                            Mechanism::PsCrc};

inline std::string_view mechanism_name(Mechanism m) {
    switch (m) {
        case Mechanism::Parity: return "parity";
        case Mechanism::Edac: return "edac";
        case Mechanism::FeCrc: return "fe_crc";
        case Mechanism::PsCrc: return "ps_crc";
    }
    return "?";
}

// Bit set over Mechanism.
class MechanismMask {
public:
    constexpr MechanismMask() = default;
    constexpr MechanismMask(std::initializer_list<Mechanism> ms) {
        for (auto m : ms) set(m);
    }
    constexpr bool has(Mechanism m) const { return bits_ & bit(m); }
    constexpr void set(Mechanism m) { bits_ |= bit(m); }
    constexpr void clear(Mechanism m) { bits_ &= static_cast<std::uint8_t>(~bit(m)); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool operator==(const MechanismMask&) const = default;

private:
    static constexpr std::uint8_t bit(Mechanism m) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(m)); }
    std::uint8_t bits_ = 0;
};

// Error-origin locations, one per row of the location/mechanism table.
enum class Location : std::uint8_t {
    XferChannelToCache,
    CciChan,
    Bus1,
    CciMem,
    Bus2,
    CacheMemory,
    XferCacheToDisk,
    Disk,
};

inline constexpr std::array<Location, 8> kAllLocations = {
    Location::XferChannelToCache, Location::CciChan, Location::Bus1,           Location::CciMem,
    Location::Bus2,               Location::CacheMemory, Location::XferCacheToDisk, Location::Disk,
};

inline std::string_view location_name(Location l) {
    switch (l) {
        case Location::XferChannelToCache: return "XFER_CHANNEL_TO_CACHE";
        case Location::CciChan: return "CCI_CHAN";
        case Location::Bus1: return "BUS1";
        case Location::CciMem: return "CCI_MEM";
        case Location::Bus2: return "BUS2";
        case Location::CacheMemory: return "CACHE_MEMORY";
        case Location::XferCacheToDisk: return "XFER_CACHE_TO_DISK";
        case Location::Disk: return "DISK";
    }
    return "?";
}

inline Location parse_location(std::string_view s) {
    for (auto l : kAllLocations)
        if (location_name(l) == s) return l;
    throw ConfigError("unknown error-origin location: " + std::string(s));
}

// Mechanisms able to see an error that originates at `origin`, in the order they are
// checked along the data path. The frontend CRC appears in every row.
inline std::vector<Mechanism> mechanisms_for(Location origin) {
    switch (origin) {
        case Location::Bus1: return {Mechanism::Parity, Mechanism::FeCrc};
        case Location::Bus2:
        case Location::CacheMemory: return {Mechanism::Edac, Mechanism::FeCrc};
        case Location::XferCacheToDisk:
        case Location::Disk: return {Mechanism::PsCrc, Mechanism::FeCrc};
        case Location::XferChannelToCache:
        case Location::CciChan:
        case Location::CciMem: return {Mechanism::FeCrc};
    }
    throw ConfigError("unknown error-origin location");
}

inline MechanismMask scope_of(Location origin) {
    MechanismMask m;
    for (auto mech : mechanisms_for(origin)) m.set(mech);
    return m;
}

enum class CheckResult : std::uint8_t { Clean, Corrected, Detected, Missed };

inline std::string_view check_result_name(CheckResult r) {
    switch (r) {
        case CheckResult::Clean: return "CLEAN";
        case CheckResult::Corrected: return "CORRECTED";
        case CheckResult::Detected: return "DETECTED";
        case CheckResult::Missed: return "MISSED";
    }
    return "?";
}

struct CheckOutcome {
    CheckResult result = CheckResult::Clean;
    std::uint32_t erroneous_symbols = 0;
    std::uint32_t corrected_symbols = 0;
    // Parity: odd-count symbols. EDAC: uncorrectable (3-error) symbols. CRC: all
    // erroneous symbols when the record is flagged.
    std::uint32_t detected_symbols = 0;
    std::uint32_t missed_symbols = 0;
};

inline CheckOutcome parity_check(const SymbolErrors& errs) {
    CheckOutcome out;
    for (const auto& [sym, n] : errs.entries()) {
        ++out.erroneous_symbols;
        if (n % 2)
            ++out.detected_symbols;
        else
            ++out.missed_symbols;
    }
    if (out.erroneous_symbols == 0)
        out.result = CheckResult::Clean;
    else
        out.result = out.detected_symbols ? CheckResult::Detected : CheckResult::Missed;
    return out;
}

struct EdacResult {
    CheckOutcome outcome;
    SymbolErrors after;  // residual counts: corrected symbols removed
};

inline EdacResult edac_check(const SymbolErrors& errs) {
    EdacResult r{CheckOutcome{}, SymbolErrors(errs.geometry())};
    auto& out = r.outcome;
    for (const auto& [sym, n] : errs.entries()) {
        ++out.erroneous_symbols;
        if (n <= 2) {
            ++out.corrected_symbols;
        } else {
            if (n == 3)
                ++out.detected_symbols;
            else
                ++out.missed_symbols;
            r.after.set(sym, n);
        }
    }
    if (out.detected_symbols)
        out.result = CheckResult::Detected;
    else if (out.corrected_symbols)
        out.result = CheckResult::Corrected;
    else
        out.result = out.erroneous_symbols ? CheckResult::Missed : CheckResult::Clean;
    return r;
}

inline constexpr double kDefaultCrcEscape = 1.0 / 4294967296.0;  // 2^-32

// Shared by the frontend and physical-sector CRCs. The escape draw is only consumed
// when the record is beyond the guaranteed-detection region.
inline CheckOutcome crc_check(const SymbolErrors& errs, RngStream& escape_rng, double p_escape = kDefaultCrcEscape) {
    CheckOutcome out;
    out.erroneous_symbols = static_cast<std::uint32_t>(errs.symbols_in_error());
    if (out.erroneous_symbols == 0) return out;
    bool detected = true;
    if (out.erroneous_symbols > 3) detected = !escape_rng.bernoulli(p_escape);
    if (detected) {
        out.result = CheckResult::Detected;
        out.detected_symbols = out.erroneous_symbols;
    } else {
        out.result = CheckResult::Missed;
        out.missed_symbols = out.erroneous_symbols;
    }
    return out;
}

}  // namespace dependasim
