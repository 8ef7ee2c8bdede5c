#pragma once

// Deterministic discrete-event kernel: integer-nanosecond clock, (time, seq)
// ordered event queue, and labelled random streams derived from one seed.

#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dependasim/error.hpp"

namespace dependasim {

// Nanoseconds since simulation start.
using SimTime = std::int64_t;

inline constexpr SimTime kNanosecond = 1;
inline constexpr SimTime kMicrosecond = 1'000;
inline constexpr SimTime kMillisecond = 1'000'000;
inline constexpr SimTime kSecond = 1'000'000'000;
inline constexpr SimTime kMinute = 60 * kSecond;
inline constexpr SimTime kHour = 60 * kMinute;

inline constexpr double to_ms(SimTime t) { return static_cast<double>(t) / kMillisecond; }
inline constexpr double to_hours(SimTime t) { return static_cast<double>(t) / kHour; }

inline SimTime from_seconds(double s) { return static_cast<SimTime>(s * static_cast<double>(kSecond) + 0.5); }

// What an event is for. Only used for tracing and the per-kind dispatch counters.
enum class EventKind : std::uint8_t {
    RequestArrival,
    FaultInjection,
    ComponentFailure,
    RepairCompletion,
    WritebackTimer,
    RebuildStep,
    WindowClose,
    Other,
};

struct Event {
    SimTime fire_at = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Other;
    std::function<void()> action;
};

class Simulator {
public:
    SimTime now() const { return now_; }
    std::uint64_t dispatched() const { return dispatched_; }
    std::size_t pending() const { return queue_.size(); }

    // Scheduling in the past is a programming error in the model, not a user error.
    void schedule(SimTime fire_at, EventKind kind, std::function<void()> action) {
        if (fire_at < now_) {
            throw std::logic_error("event scheduled in the past: fire_at=" + std::to_string(fire_at) +
                                   " now=" + std::to_string(now_));
        }
        queue_.push(Event{fire_at, next_seq_++, kind, std::move(action)});
    }

    void schedule_in(SimTime delay, EventKind kind, std::function<void()> action) {
        schedule(now_ + delay, kind, std::move(action));
    }

    // Dispatches every event with fire_at <= t_end, then parks the clock at t_end.
    void run_until(SimTime t_end) {
        while (!queue_.empty() && queue_.top().fire_at <= t_end) {
            // Move the action out before popping: the handler may schedule more events.
            Event ev = std::move(const_cast<Event&>(queue_.top()));
            queue_.pop();
            now_ = ev.fire_at;
            ++dispatched_;
            if (ev.action) ev.action();
        }
        if (t_end > now_) now_ = t_end;
    }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

inline std::uint64_t stream_seed(std::uint64_t global_seed, std::string_view label) {
    return detail::splitmix64(detail::splitmix64(global_seed) ^ detail::fnv1a(label));
}

// One independent pseudo-random stream. Cheap to copy; copies continue the same sequence.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::string label, std::uint64_t seed) : label_(std::move(label)), seed_(seed), engine_(seed) {}

    const std::string& label() const { return label_; }
    std::mt19937_64& engine() { return engine_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return std::generate_canonical<double, 64>(engine_); }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    // Uniform integer on [lo, hi].
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
    }

    double exponential(double mean) { return std::exponential_distribution<double>(1.0 / mean)(engine_); }

    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        return std::poisson_distribution<std::uint64_t>(mean)(engine_);
    }

    double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(engine_); }

    // Derives a child stream; used for order-independent sub-trials.
    RngStream substream(std::uint64_t index) const {
        return RngStream(label_ + "#" + std::to_string(index),
                         detail::splitmix64(seed_ ^ detail::splitmix64(index + 1)));
    }

private:
    std::string label_;
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
};

// Hands out one stream per label. Reusing a label is a configuration error, so adding
// a consumer never shifts the draws seen by another.
class RngRegistry {
public:
    explicit RngRegistry(std::uint64_t global_seed) : global_seed_(global_seed) {}

    std::uint64_t global_seed() const { return global_seed_; }

    RngStream fork(const std::string& label) {
        if (label.empty()) throw ConfigError("random stream label must be non-empty");
        if (!labels_.insert(label).second) throw ConfigError("duplicate random stream label: " + label);
        return RngStream(label, stream_seed(global_seed_, label));
    }

private:
    std::uint64_t global_seed_;
    std::unordered_set<std::string> labels_;
};

}  // namespace dependasim
