#include <gtest/gtest.h>

#include "archeval/nrmt.hpp"

using namespace archeval;

namespace {

// Levels 10, 20, ... with the given medians. A negative median marks a
// degenerate level.
RampResult ramp_of(const std::vector<double>& medians, std::int64_t step = 10) {
    RampResult r;
    r.ramp_config = RampConfig{step, step * static_cast<std::int64_t>(medians.size()), step, 0, 1};
    for (std::size_t i = 0; i < medians.size(); ++i) {
        LevelObservation l;
        l.concurrency = step * static_cast<std::int64_t>(i + 1);
        l.rounds = 1;
        if (medians[i] < 0) {
            l.degenerate = true;
            l.failure_count = l.concurrency;
        } else {
            l.response_time_median_ms = medians[i];
            l.success_count = l.concurrency;
            l.total_time_s = medians[i] / 1000.0;
            l.throughput_rps = static_cast<double>(l.concurrency) / l.total_time_s;
        }
        r.levels.push_back(l);
    }
    return r;
}

}  // namespace

TEST(Nrmt, KneeInConstructedSeries) {
    const auto f = detect_nrmt(ramp_of({50, 50, 50, 50, 50, 90, 120, 160}));
    EXPECT_EQ(f.nrmt, 50);
    EXPECT_TRUE(f.saturated);
    EXPECT_DOUBLE_EQ(f.baseline_median_ms, 50.0);
    EXPECT_EQ(f.method, KneeMethod::latency_knee);
    EXPECT_DOUBLE_EQ(f.epsilon, 0.10);
    EXPECT_EQ(f.ramp_step, 10);
}

TEST(Nrmt, FlatSeriesReportsMaxLevel) {
    const auto f = detect_nrmt(ramp_of(std::vector<double>(12, 50.0)));
    EXPECT_EQ(f.nrmt, 120);
    EXPECT_FALSE(f.saturated);
}

TEST(Nrmt, SingleSpikeIsNotConfirmed) {
    const auto f = detect_nrmt(ramp_of({50, 50, 50, 80, 50, 50}));
    EXPECT_EQ(f.nrmt, 60);
    EXPECT_FALSE(f.saturated);
    // With confirm = 1 the spike alone is enough.
    const auto g = detect_nrmt(ramp_of({50, 50, 50, 80, 50, 50}), {0.10, 1});
    EXPECT_EQ(g.nrmt, 30);
    EXPECT_TRUE(g.saturated);
}

TEST(Nrmt, ThresholdIsStrict) {
    // 55 is exactly 1.1 * 50 and does not violate.
    EXPECT_FALSE(detect_nrmt(ramp_of({50, 50, 50, 55, 55, 55})).saturated);
    EXPECT_TRUE(detect_nrmt(ramp_of({50, 50, 50, 55.001, 55.001})).saturated);
}

TEST(Nrmt, RequiresThreeUsableLevels) {
    EXPECT_THROW(detect_nrmt(ramp_of({50, 50})), InvalidArgument);
    EXPECT_THROW(detect_nrmt(ramp_of({50, -1, 50, -1})), InvalidArgument);
    EXPECT_THROW(detect_nrmt(RampResult{}), InvalidArgument);
}

TEST(Nrmt, RejectsBadOptions) {
    const auto r = ramp_of({50, 50, 50, 50});
    EXPECT_THROW(detect_nrmt(r, {0.0, 2}), InvalidArgument);
    EXPECT_THROW(detect_nrmt(r, {1.0, 2}), InvalidArgument);
    EXPECT_THROW(detect_nrmt(r, {0.1, 0}), InvalidArgument);
}

TEST(Nrmt, LeadingDegenerateLevelsAreSkipped) {
    const auto f = detect_nrmt(ramp_of({-1, 50, 50, 50, 50, 90, 95}));
    EXPECT_EQ(f.nrmt, 50);
    EXPECT_DOUBLE_EQ(f.baseline_median_ms, 50.0);
}

TEST(Nrmt, LaterDegenerateLevelsCountAsViolations) {
    const auto f = detect_nrmt(ramp_of({50, 50, 50, 50, -1, -1, -1}));
    EXPECT_EQ(f.nrmt, 40);
    EXPECT_TRUE(f.saturated);
}

TEST(Nrmt, ViolationFromFirstUsableLevel) {
    // Baseline 70; levels 10 and 20 both exceed 77.
    const auto f = detect_nrmt(ramp_of({80, 80, 50, 200, 200}));
    EXPECT_EQ(f.nrmt, 10);
    EXPECT_TRUE(f.saturated);
}

TEST(Nrmt, NonMultipleStepIsRecorded) {
    const auto f = detect_nrmt(ramp_of({50, 50, 50, 50, 70, 80}, 16));
    EXPECT_EQ(f.nrmt, 64);
    EXPECT_EQ(f.ramp_step, 16);
}

TEST(Nrmt, Deterministic) {
    const auto r = ramp_of({50, 51, 49, 52, 57, 60, 58, 70});
    const auto a = detect_nrmt(r);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(detect_nrmt(r), a);
}

TEST(Nrmt, LargerEpsilonNeverLowersNrmt) {
    const std::vector<std::vector<double>> series = {
        {50, 50, 50, 50, 50, 90, 120, 160},
        {50, 51, 49, 52, 57, 60, 58, 70, 90, 130},
        {40, 44, 48, 52, 56, 60, 64, 68, 72, 76, 80},
        {50, 50, 50, 80, 50, 85, 90, 50, 120, 121},
    };
    for (const auto& m : series) {
        const auto r = ramp_of(m);
        std::int64_t prev = 0;
        for (double eps = 0.01; eps < 0.99; eps += 0.01) {
            const auto n = detect_nrmt(r, {eps, 2}).nrmt;
            EXPECT_GE(n, prev) << "epsilon " << eps;
            prev = n;
        }
    }
}

TEST(Nrmt, ThroughputVariant) {
    // Throughput = c / median: linear while the median is flat.
    const NrmtOptions opt{0.10, 2, KneeMethod::throughput_knee};
    const auto f = detect_nrmt(ramp_of({50, 50, 50, 50, 50, 90, 120, 160}), opt);
    EXPECT_EQ(f.nrmt, 50);
    EXPECT_TRUE(f.saturated);
    EXPECT_EQ(f.method, KneeMethod::throughput_knee);
    EXPECT_FALSE(detect_nrmt(ramp_of(std::vector<double>(8, 50.0)), opt).saturated);
}

TEST(Nrmt, MethodNames) {
    EXPECT_EQ(knee_method_from_string(to_string(KneeMethod::latency_knee)),
              KneeMethod::latency_knee);
    EXPECT_EQ(knee_method_from_string("throughput_knee"), KneeMethod::throughput_knee);
    EXPECT_THROW(knee_method_from_string("pelt"), InvalidArgument);
}
