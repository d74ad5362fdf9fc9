#pragma once

// Recorded-data fixtures: raw measurements constructed so that the derived
// metrics equal given NRMT / ASL / RTM values, plus the three reference
// systems used throughout the tests.

#include <map>
#include <string>

#include "archeval/campaign.hpp"

namespace fixtures {

using namespace archeval;

struct Recorded {
    std::int64_t nrmt;
    double asl;
    double rtm_ms;
};

// Ramp with a flat 100 ms median up to `nrmt` and two slow levels after it,
// one load snapshot at `asl`, and n_r identical RTM samples.
inline RawMeasurements make_raw(const Recorded& r, std::int64_t n_r, std::int64_t step = 16) {
    RawMeasurements raw;
    raw.ramp.ramp_config = RampConfig{step, r.nrmt + 2 * step, step, 0, 1};
    for (std::int64_t c = step; c <= r.nrmt + 2 * step; c += step) {
        LevelObservation l;
        l.concurrency = c;
        l.rounds = 1;
        l.success_count = c;
        const double median = c <= r.nrmt ? 100.0 : 200.0;
        l.response_time_median_ms = median;
        l.total_time_s = median / 1000.0;
        l.throughput_rps = static_cast<double>(c) / l.total_time_s;
        raw.ramp.levels.push_back(l);
    }
    raw.load.push_back({{r.asl, r.asl, r.asl}, Timestamp(std::chrono::seconds(1'700'000'000))});
    raw.rtm_samples.assign(static_cast<std::size_t>(n_r), ResponseSample::ok(r.rtm_ms));
    return raw;
}

inline SystemProfile profile(const std::string& name, HsxInputs hsx, std::int64_t n_r = 1000) {
    SystemProfile p;
    p.name = name;
    p.target.endpoint = "http://fixture.invalid/predict";
    p.hsx_inputs = hsx;
    p.rtm_requests = n_r;
    return p;
}

inline SystemProfile system_a() { return profile("System A", {60, 2, 0.20}); }
inline SystemProfile system_b() { return profile("System B", {40, 1, 0.15}); }
inline SystemProfile system_c() { return profile("System C", {60, 2, 0.20}); }

inline std::map<std::string, Recorded> reference_recordings() {
    return {{"System A", {256, 6.57, 460}},
            {"System B", {256, 6.12, 460}},
            {"System C", {272, 5.85, 350}}};
}

// Serves recorded raw data instead of touching the network.
inline Measurer recorded_measurer(std::map<std::string, Recorded> data) {
    return [data](const SystemProfile& p, const RawSink&) {
        const auto it = data.find(p.name);
        if (it == data.end()) throw StageError("ramp", "no recording for " + p.name);
        return make_raw(it->second, p.rtm_requests);
    };
}

}  // namespace fixtures
