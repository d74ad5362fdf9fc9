#pragma once

// Locates the highest tested concurrency that still scales linearly.
//
// The baseline is taken from the first three usable (non-degenerate) levels.
// A level violates linearity when
//   latency_knee:    median > (1 + epsilon) * baseline median
//   throughput_knee: throughput < (1 - epsilon) * k * concurrency, where k is
//                    the mean throughput per unit of concurrency over the
//                    baseline levels
// Degenerate levels after the first usable one always count as violations.
// NRMT is the level just before the first run of `confirm` consecutive
// violations; without such a run it is the largest tested level.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "archeval/error.hpp"
#include "archeval/harness.hpp"

namespace archeval {

enum class KneeMethod { latency_knee, throughput_knee };

inline std::string to_string(KneeMethod m) {
    return m == KneeMethod::latency_knee ? "latency_knee" : "throughput_knee";
}

inline KneeMethod knee_method_from_string(const std::string& s) {
    if (s == "latency_knee" || s == "latency") return KneeMethod::latency_knee;
    if (s == "throughput_knee" || s == "throughput") return KneeMethod::throughput_knee;
    throw InvalidArgument("unknown NRMT method '" + s + "'");
}

struct NrmtOptions {
    double epsilon = 0.10;
    std::int64_t confirm = 2;
    KneeMethod method = KneeMethod::latency_knee;

    bool operator==(const NrmtOptions&) const = default;
};

struct NrmtFinding {
    std::int64_t nrmt = 0;
    KneeMethod method = KneeMethod::latency_knee;
    double epsilon = 0;
    double baseline_median_ms = 0;
    bool saturated = false;   // a deviation was confirmed inside the ramp
    std::int64_t ramp_step = 0;  // resolution of the answer

    bool operator==(const NrmtFinding&) const = default;
};

inline NrmtFinding detect_nrmt(const RampResult& ramp, const NrmtOptions& opt = {}) {
    if (!(opt.epsilon > 0 && opt.epsilon < 1))
        throw InvalidArgument("NRMT epsilon must lie in (0, 1)");
    if (opt.confirm < 1) throw InvalidArgument("NRMT confirm must be at least 1");

    const auto& levels = ramp.levels;
    std::size_t first_usable = levels.size();
    std::vector<std::size_t> baseline;
    for (std::size_t i = 0; i < levels.size() && baseline.size() < 3; ++i) {
        if (levels[i].degenerate || !levels[i].response_time_median_ms) continue;
        if (first_usable == levels.size()) first_usable = i;
        baseline.push_back(i);
    }
    if (baseline.size() < 3)
        throw InvalidArgument("NRMT detection needs at least 3 non-degenerate ramp levels, got " +
                              std::to_string(baseline.size()));

    NrmtFinding f;
    f.method = opt.method;
    f.epsilon = opt.epsilon;
    f.ramp_step = ramp.ramp_config.step;
    double rate_per_unit = 0;
    for (std::size_t i : baseline) {
        f.baseline_median_ms += *levels[i].response_time_median_ms;
        rate_per_unit += levels[i].throughput_rps / static_cast<double>(levels[i].concurrency);
    }
    f.baseline_median_ms /= 3.0;
    rate_per_unit /= 3.0;

    auto violates = [&](const LevelObservation& l) {
        if (l.degenerate || !l.response_time_median_ms) return true;
        if (opt.method == KneeMethod::latency_knee)
            return *l.response_time_median_ms > (1.0 + opt.epsilon) * f.baseline_median_ms;
        const double linear = rate_per_unit * static_cast<double>(l.concurrency);
        return l.throughput_rps < (1.0 - opt.epsilon) * linear;
    };

    std::int64_t run = 0;
    for (std::size_t i = first_usable; i < levels.size(); ++i) {
        run = violates(levels[i]) ? run + 1 : 0;
        if (run == opt.confirm) {
            const std::size_t run_start = i + 1 - static_cast<std::size_t>(opt.confirm);
            const std::size_t knee = run_start > first_usable ? run_start - 1 : first_usable;
            f.nrmt = levels[knee].concurrency;
            f.saturated = true;
            return f;
        }
    }
    f.nrmt = levels.back().concurrency;
    f.saturated = false;
    return f;
}

}  // namespace archeval
