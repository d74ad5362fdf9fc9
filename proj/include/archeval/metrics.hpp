#pragma once

// Scalability and performance metrics for comparing serving architectures.
//
//   HSX = 1 / (time_minutes * ease * cost_keur_month)
//   SC  = NRMT * HSX / ASL
//   PC  = N_r / RTM
//
// Everything here is a pure function of its arguments. Values are kept at
// full double precision; two-decimal rounding happens only in report.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "archeval/error.hpp"

namespace archeval {

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::nanoseconds>;

inline Timestamp now_timestamp() {
    return std::chrono::time_point_cast<std::chrono::nanoseconds>(Clock::now());
}

/// Operator-supplied horizontal scaling estimates.
struct HsxInputs {
    double time_minutes = 0;     // minutes to double NRMT capacity
    int ease = 0;                // 1 easy, 2 moderate, 3 difficult
    double cost_keur_month = 0;  // thousand EUR / month to double NRMT

    bool operator==(const HsxInputs&) const = default;
};

/// One reading of the 1/5/15-minute runnable-process load averages.
struct LoadSnapshot {
    std::vector<double> intervals;
    Timestamp taken_at{};

    bool operator==(const LoadSnapshot&) const = default;
};

enum class Outcome { success, timeout, transport_error, http_error };

inline std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::timeout: return "timeout";
        case Outcome::transport_error: return "transport_error";
        case Outcome::http_error: return "http_error";
    }
    return "unknown";
}

/// Result of a single request. `elapsed_ms` is set only on success.
/// `status` carries the HTTP status (or the grpc-status for gRPC targets)
/// whenever a response arrived.
struct ResponseSample {
    Outcome outcome = Outcome::success;
    std::optional<double> elapsed_ms;
    int status = 0;

    static ResponseSample ok(double ms, int status = 200) {
        return {Outcome::success, ms, status};
    }
    static ResponseSample failed(Outcome o, int status = 0) { return {o, std::nullopt, status}; }

    bool succeeded() const noexcept { return outcome == Outcome::success && elapsed_ms.has_value(); }

    bool operator==(const ResponseSample&) const = default;
};

/// The six metric values of one measured system plus the inputs they came from.
struct MetricSet {
    std::int64_t nrmt = 0;
    HsxInputs hsx_inputs;
    double hsx = 0;
    double asl = 0;
    double rtm_ms = 0;
    std::int64_t n_r = 0;
    double sc = 0;
    double pc = 0;

    bool operator==(const MetricSet&) const = default;
};

struct EvaluationDelta {
    double delta_s = 0;
    double delta_p = 0;
    bool accepted = false;

    bool operator==(const EvaluationDelta&) const = default;
};

enum class SensitivityMetric { nrmt, hsx, asl, rtm };

inline constexpr SensitivityMetric kSensitivityMetrics[] = {
    SensitivityMetric::nrmt, SensitivityMetric::hsx, SensitivityMetric::asl, SensitivityMetric::rtm};

inline std::string_view to_string(SensitivityMetric m) {
    switch (m) {
        case SensitivityMetric::nrmt: return "NRMT";
        case SensitivityMetric::hsx: return "HSX";
        case SensitivityMetric::asl: return "ASL";
        case SensitivityMetric::rtm: return "RTM";
    }
    return "?";
}

struct SensitivityPoint {
    SensitivityMetric varied_metric = SensitivityMetric::nrmt;
    double relative_change = 0;
    double sc = 0;
    double pc = 0;

    bool operator==(const SensitivityPoint&) const = default;
};

struct RtmResult {
    double median_ms = 0;
    std::size_t success_count = 0;
    std::size_t excluded_count = 0;
};

// ---------------------------------------------------------------------------

inline void validate(const HsxInputs& in) {
    if (!(in.time_minutes > 0) || !std::isfinite(in.time_minutes))
        throw InvalidArgument("HSX time_minutes must be a positive number");
    if (in.ease < 1 || in.ease > 3) throw InvalidArgument("HSX ease must be 1, 2 or 3");
    if (!(in.cost_keur_month > 0) || !std::isfinite(in.cost_keur_month))
        throw InvalidArgument("HSX cost_keur_month must be a positive number");
}

inline double compute_hsx(const HsxInputs& in) {
    validate(in);
    return 1.0 / (in.time_minutes * static_cast<double>(in.ease) * in.cost_keur_month);
}

/// Mean of every interval value across all snapshots.
inline double compute_asl(std::span<const LoadSnapshot> snapshots) {
    if (snapshots.empty()) throw InvalidArgument("ASL needs at least one load snapshot");
    double sum = 0;
    std::size_t count = 0;
    for (const auto& s : snapshots) {
        if (s.intervals.empty()) throw InvalidArgument("load snapshot has no interval values");
        for (double v : s.intervals) {
            if (!(v >= 0) || !std::isfinite(v))
                throw InvalidArgument("load values must be finite and non-negative");
            sum += v;
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

/// Median of the successful samples' elapsed times. Failed samples are
/// excluded and counted.
inline RtmResult compute_rtm(std::span<const ResponseSample> samples) {
    std::vector<double> times;
    times.reserve(samples.size());
    for (const auto& s : samples)
        if (s.succeeded()) times.push_back(*s.elapsed_ms);

    RtmResult r;
    r.success_count = times.size();
    r.excluded_count = samples.size() - times.size();
    if (times.empty()) throw InvalidArgument("RTM needs at least one successful sample");

    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    if (n % 2 == 1)
        r.median_ms = times[n / 2];
    else
        r.median_ms = (times[n / 2 - 1] + times[n / 2]) / 2.0;
    return r;
}

namespace detail {

inline double sc_formula(double nrmt, double hsx, double asl) { return nrmt * hsx / asl; }
inline double pc_formula(double n_r, double rtm_ms) { return n_r / rtm_ms; }

}  // namespace detail

/// `hsx` must be the unrounded value.
inline double compute_sc(std::int64_t nrmt, double hsx, double asl) {
    if (nrmt <= 0) throw InvalidArgument("NRMT must be positive");
    if (!(hsx > 0)) throw InvalidArgument("HSX must be positive");
    if (asl == 0) throw InvalidArgument("ASL is zero; SC is undefined");
    if (!(asl > 0)) throw InvalidArgument("ASL must be positive");
    return detail::sc_formula(static_cast<double>(nrmt), hsx, asl);
}

inline double compute_pc(std::int64_t n_r, double rtm_ms) {
    if (n_r < 1) throw InvalidArgument("N_r must be at least 1");
    if (rtm_ms == 0) throw InvalidArgument("RTM is zero; PC is undefined");
    if (!(rtm_ms > 0)) throw InvalidArgument("RTM must be positive");
    return detail::pc_formula(static_cast<double>(n_r), rtm_ms);
}

inline MetricSet make_metric_set(std::int64_t nrmt, const HsxInputs& hsx_inputs, double asl,
                                 double rtm_ms, std::int64_t n_r) {
    MetricSet m;
    m.nrmt = nrmt;
    m.hsx_inputs = hsx_inputs;
    m.hsx = compute_hsx(hsx_inputs);
    m.asl = asl;
    m.rtm_ms = rtm_ms;
    m.n_r = n_r;
    m.sc = compute_sc(nrmt, m.hsx, asl);
    m.pc = compute_pc(n_r, rtm_ms);
    return m;
}

/// Selection predicate: both deltas point the same way (or one is zero) and
/// the net change is strictly positive.
inline bool pattern_accepted(double delta_p, double delta_s) {
    return (delta_p * delta_s) >= 0 && (delta_p + delta_s) > 0;
}

inline EvaluationDelta evaluate_pattern(const MetricSet& baseline, const MetricSet& candidate) {
    if (baseline.n_r != candidate.n_r)
        throw InvalidArgument("PC values are not comparable: N_r differs (" +
                              std::to_string(baseline.n_r) + " vs " +
                              std::to_string(candidate.n_r) + ")");
    EvaluationDelta d;
    d.delta_s = candidate.sc - baseline.sc;
    d.delta_p = candidate.pc - baseline.pc;
    d.accepted = pattern_accepted(d.delta_p, d.delta_s);
    return d;
}

/// Rescales one of NRMT, HSX, ASL or RTM by (1 + r) for r on the grid
/// {-span, ..., -step, 0, step, ..., span} and recomputes SC and PC with the
/// other metrics held at the baseline. NRMT is treated as continuous here.
inline std::vector<SensitivityPoint> sensitivity_scan(const MetricSet& baseline, double step = 0.05,
                                                      double span = 0.20) {
    if (!(span > 0)) throw InvalidArgument("sensitivity span must be positive");
    if (!(step > 0)) throw InvalidArgument("sensitivity step must be positive");
    if (step > span) throw InvalidArgument("sensitivity step must not exceed span");

    const auto k_max = static_cast<int>(std::floor(span / step + 1e-9));
    const double nrmt = static_cast<double>(baseline.nrmt);
    const double n_r = static_cast<double>(baseline.n_r);

    std::vector<SensitivityPoint> out;
    out.reserve(4 * static_cast<std::size_t>(2 * k_max + 1));
    for (SensitivityMetric m : kSensitivityMetrics) {
        for (int k = -k_max; k <= k_max; ++k) {
            const double r = k * step;
            const double f = 1.0 + r;
            SensitivityPoint p{m, r, baseline.sc, baseline.pc};
            if (k != 0) {
                switch (m) {
                    case SensitivityMetric::nrmt:
                        p.sc = detail::sc_formula(nrmt * f, baseline.hsx, baseline.asl);
                        break;
                    case SensitivityMetric::hsx:
                        p.sc = detail::sc_formula(nrmt, baseline.hsx * f, baseline.asl);
                        break;
                    case SensitivityMetric::asl:
                        p.sc = detail::sc_formula(nrmt, baseline.hsx, baseline.asl * f);
                        break;
                    case SensitivityMetric::rtm:
                        p.pc = detail::pc_formula(n_r, baseline.rtm_ms * f);
                        break;
                }
            }
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace archeval
