#pragma once

// Closed-loop load generation against one target.
//
// A level with concurrency c starts c worker slots at once; each slot owns a
// pooled connection and issues `rounds` requests back to back, so at most c
// requests are ever in flight. The level ends when every slot has finished.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <latch>
#include <memory>
#include <optional>
#include <stop_token>
#include <thread>
#include <vector>

#include "archeval/client.hpp"
#include "archeval/error.hpp"
#include "archeval/metrics.hpp"
#include "archeval/target.hpp"

namespace archeval {

struct RampConfig {
    std::int64_t start = 10;
    std::int64_t max = 400;
    std::int64_t step = 10;
    std::int64_t warmup_requests = 50;
    std::int64_t rounds_per_level = 5;

    bool operator==(const RampConfig&) const = default;
};

inline void validate(const RampConfig& r) {
    if (r.start < 1) throw InvalidArgument("ramp start must be at least 1");
    if (r.start > r.max) throw InvalidArgument("ramp start must not exceed max");
    if (r.step < 1) throw InvalidArgument("ramp step must be at least 1");
    if (r.rounds_per_level < 1) throw InvalidArgument("ramp rounds_per_level must be at least 1");
    if (r.warmup_requests < 0) throw InvalidArgument("ramp warmup_requests must be non-negative");
}

struct LevelObservation {
    std::int64_t concurrency = 0;
    std::int64_t rounds = 0;
    std::vector<ResponseSample> samples;
    std::optional<double> response_time_median_ms;  // empty when degenerate
    double total_time_s = 0;
    std::int64_t success_count = 0;
    std::int64_t failure_count = 0;
    double throughput_rps = 0;
    bool degenerate = false;  // no request succeeded

    bool operator==(const LevelObservation&) const = default;
};

struct RampResult {
    std::vector<LevelObservation> levels;
    RampConfig ramp_config;
    bool aborted_early = false;

    bool operator==(const RampResult&) const = default;
};

/// Fills the derived fields of an observation from its samples.
inline void summarize(LevelObservation& obs) {
    obs.success_count = 0;
    for (const auto& s : obs.samples) obs.success_count += s.succeeded() ? 1 : 0;
    obs.failure_count = static_cast<std::int64_t>(obs.samples.size()) - obs.success_count;
    obs.degenerate = obs.success_count == 0;
    obs.response_time_median_ms.reset();
    if (!obs.degenerate) obs.response_time_median_ms = compute_rtm(obs.samples).median_ms;
    obs.throughput_rps =
        obs.total_time_s > 0 ? static_cast<double>(obs.success_count) / obs.total_time_s : 0.0;
}

class LoadHarness {
public:
    using LevelCallback = std::function<void(const LevelObservation&)>;

    explicit LoadHarness(TargetSpec target) : target_(std::move(target)) { validate(target_); }

    const TargetSpec& target() const noexcept { return target_; }

    /// Issues concurrency * rounds requests with at most `concurrency` in flight.
    LevelObservation dispatch_batch(std::int64_t concurrency, std::int64_t rounds) {
        if (concurrency < 1) throw InvalidArgument("concurrency must be at least 1");
        if (rounds < 1) throw InvalidArgument("rounds must be at least 1");
        ensure_slots(concurrency);

        const auto n = static_cast<std::size_t>(concurrency);
        std::vector<std::vector<ResponseSample>> per_slot(n);
        std::latch go(1);
        std::vector<std::jthread> workers;
        workers.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            workers.emplace_back([&, i] {
                auto& out = per_slot[i];
                out.reserve(static_cast<std::size_t>(rounds));
                go.wait();
                for (std::int64_t r = 0; r < rounds; ++r) out.push_back(slots_[i]->send());
            });
        }
        const auto t0 = std::chrono::steady_clock::now();
        go.count_down();
        workers.clear();  // joins
        const auto t1 = std::chrono::steady_clock::now();

        LevelObservation obs;
        obs.concurrency = concurrency;
        obs.rounds = rounds;
        obs.total_time_s = std::chrono::duration<double>(t1 - t0).count();
        obs.samples.reserve(n * static_cast<std::size_t>(rounds));
        for (auto& v : per_slot) obs.samples.insert(obs.samples.end(), v.begin(), v.end());
        summarize(obs);
        return obs;
    }

    /// Warm-up requests (discarded), then one batch per level in ascending
    /// order. Stops early after three consecutive degenerate levels.
    RampResult run_ramp(const RampConfig& cfg, const LevelCallback& on_level = {}) {
        validate(cfg);
        (void)run_sequential(cfg.warmup_requests);

        RampResult result;
        result.ramp_config = cfg;
        int degenerate_run = 0;
        for (std::int64_t c = cfg.start; c <= cfg.max; c += cfg.step) {
            result.levels.push_back(dispatch_batch(c, cfg.rounds_per_level));
            if (on_level) on_level(result.levels.back());
            degenerate_run = result.levels.back().degenerate ? degenerate_run + 1 : 0;
            if (degenerate_run >= 3) {
                result.aborted_early = c + cfg.step <= cfg.max;
                break;
            }
        }
        return result;
    }

    /// One request at a time on a single connection.
    std::vector<ResponseSample> run_sequential(std::int64_t count) {
        if (count < 0) throw InvalidArgument("request count must be non-negative");
        ensure_slots(1);
        std::vector<ResponseSample> out;
        out.reserve(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i) out.push_back(slots_[0]->send());
        return out;
    }

    /// Keeps `concurrency` requests in flight until `stop` is requested.
    /// Returns the number of requests issued.
    std::int64_t sustain(std::int64_t concurrency, std::stop_token stop) {
        if (concurrency < 1) throw InvalidArgument("concurrency must be at least 1");
        ensure_slots(concurrency);
        std::atomic<std::int64_t> issued{0};
        {
            std::vector<std::jthread> workers;
            for (std::int64_t i = 0; i < concurrency; ++i) {
                workers.emplace_back([&, i] {
                    while (!stop.stop_requested()) {
                        (void)slots_[static_cast<std::size_t>(i)]->send();
                        ++issued;
                    }
                });
            }
        }
        return issued.load();
    }

private:
    void ensure_slots(std::int64_t n) {
        while (static_cast<std::int64_t>(slots_.size()) < n)
            slots_.push_back(std::make_unique<RequestClient>(target_));
    }

    TargetSpec target_;
    std::vector<std::unique_ptr<RequestClient>> slots_;
};

inline LevelObservation dispatch_batch(const TargetSpec& target, std::int64_t concurrency,
                                       std::int64_t rounds) {
    return LoadHarness(target).dispatch_batch(concurrency, rounds);
}

inline RampResult run_ramp(const TargetSpec& target, const RampConfig& cfg,
                           const LoadHarness::LevelCallback& on_level = {}) {
    return LoadHarness(target).run_ramp(cfg, on_level);
}

}  // namespace archeval
