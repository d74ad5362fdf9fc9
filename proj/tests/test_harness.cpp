#include <gtest/gtest.h>

#include "archeval/harness.hpp"
#include "archeval/mock.hpp"

using namespace archeval;

namespace {

struct MockFixture : ::testing::Test {
    void start(MockProfile p) {
        mock = std::make_unique<MockServer>(p);
        mock->start({"127.0.0.1", 0});
        target.endpoint = mock->predict_url();
        target.timeout_s = 5;
    }
    std::unique_ptr<MockServer> mock;
    TargetSpec target;
};

MockProfile fixed(double base_ms, std::int64_t capacity = 1000, double slope = 0) {
    MockProfile p;
    p.base_delay_ms = base_ms;
    p.capacity = capacity;
    p.overload_slope_ms = slope;
    return p;
}

}  // namespace

TEST_F(MockFixture, BatchMedianMatchesConfiguredDelay) {
    start(fixed(50));
    LoadHarness h(target);
    (void)h.dispatch_batch(10, 1);  // opens the ten pooled connections
    const auto obs = h.dispatch_batch(10, 1);
    EXPECT_EQ(obs.success_count, 10);
    EXPECT_EQ(obs.failure_count, 0);
    ASSERT_TRUE(obs.response_time_median_ms);
    EXPECT_GE(*obs.response_time_median_ms, 50.0);
    EXPECT_LT(*obs.response_time_median_ms, 65.0);
    EXPECT_FALSE(obs.degenerate);
    EXPECT_GT(obs.total_time_s, 0.049);
    EXPECT_NEAR(obs.throughput_rps, obs.success_count / obs.total_time_s, 1e-9);
}

TEST_F(MockFixture, MedianIsBitIdenticalToComputeRtm) {
    start(fixed(5));
    LoadHarness h(target);
    const auto obs = h.dispatch_batch(7, 3);
    ASSERT_TRUE(obs.response_time_median_ms);
    EXPECT_EQ(*obs.response_time_median_ms, compute_rtm(obs.samples).median_ms);
}

TEST_F(MockFixture, ConservationAndInflightBound) {
    start(fixed(20));
    LoadHarness h(target);
    for (std::int64_t c : {1, 5, 16, 33}) {
        mock->reset_stats();
        const auto obs = h.dispatch_batch(c, 3);
        EXPECT_EQ(static_cast<std::int64_t>(obs.samples.size()), c * 3);
        EXPECT_EQ(obs.success_count + obs.failure_count, c * 3);
        EXPECT_LE(mock->stats().max_inflight, c);
        EXPECT_EQ(mock->stats().served, c * 3);
    }
}

TEST_F(MockFixture, TimeoutPathClassifiesEverySample) {
    start(fixed(50));
    target.timeout_s = 0.001;
    const auto obs = dispatch_batch(target, 4, 1);
    EXPECT_EQ(obs.success_count, 0);
    EXPECT_TRUE(obs.degenerate);
    for (const auto& s : obs.samples) EXPECT_EQ(s.outcome, Outcome::timeout);
    EXPECT_THROW(compute_rtm(obs.samples), InvalidArgument);
}

TEST(Harness, UnreachableEndpointIsDegenerate) {
    int port;
    {
        MockServer m(fixed(5));
        m.start({"127.0.0.1", 0});
        port = m.http_port();
    }
    TargetSpec t;
    t.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/predict";
    t.timeout_s = 1;
    const auto obs = dispatch_batch(t, 5, 1);
    EXPECT_EQ(obs.failure_count, 5);
    EXPECT_EQ(obs.success_count, 0);
    EXPECT_TRUE(obs.degenerate);
    EXPECT_FALSE(obs.response_time_median_ms);
}

TEST(Harness, UnreachableRampAbortsAfterThreeDegenerateLevels) {
    int port;
    {
        MockServer m(fixed(5));
        m.start({"127.0.0.1", 0});
        port = m.http_port();
    }
    TargetSpec t;
    t.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/predict";
    t.timeout_s = 1;
    RampConfig cfg{10, 100, 10, 2, 1};
    const auto r = run_ramp(t, cfg);
    EXPECT_EQ(r.levels.size(), 3u);
    EXPECT_TRUE(r.aborted_early);
}

TEST_F(MockFixture, RampVisitsLevelsInOrder) {
    start(fixed(5));
    RampConfig cfg{10, 30, 10, 3, 1};
    std::vector<std::int64_t> seen;
    const auto r = run_ramp(target, cfg, [&](const LevelObservation& o) {
        seen.push_back(o.concurrency);
    });
    ASSERT_EQ(r.levels.size(), 3u);
    EXPECT_EQ(r.levels[0].concurrency, 10);
    EXPECT_EQ(r.levels[1].concurrency, 20);
    EXPECT_EQ(r.levels[2].concurrency, 30);
    EXPECT_EQ(seen, (std::vector<std::int64_t>{10, 20, 30}));
    EXPECT_FALSE(r.aborted_early);
    EXPECT_EQ(r.ramp_config, cfg);
}

TEST(Harness, DefaultRampHasFortyLevels) {
    RampConfig cfg;
    EXPECT_EQ(cfg.start, 10);
    EXPECT_EQ(cfg.max, 400);
    EXPECT_EQ(cfg.step, 10);
    EXPECT_EQ(cfg.rounds_per_level, 5);
    EXPECT_EQ(cfg.warmup_requests, 50);
    int levels = 0;
    for (auto c = cfg.start; c <= cfg.max; c += cfg.step) ++levels;
    EXPECT_EQ(levels, 40);
    EXPECT_DOUBLE_EQ(TargetSpec{}.timeout_s, 5.0);
}

TEST(Harness, RejectsBadRampConfig) {
    EXPECT_THROW(validate(RampConfig{20, 10, 10, 0, 1}), InvalidArgument);
    EXPECT_THROW(validate(RampConfig{10, 20, 0, 0, 1}), InvalidArgument);
    EXPECT_THROW(validate(RampConfig{10, 20, 10, 0, 0}), InvalidArgument);
}

TEST_F(MockFixture, MedianFlatThenRisingBeyondCapacity) {
    start(fixed(20, 32, 2));
    RampConfig cfg{8, 64, 8, 5, 4};
    const auto r = run_ramp(target, cfg);
    ASSERT_EQ(r.levels.size(), 8u);
    const double flat = *r.levels[0].response_time_median_ms;
    for (const auto& l : r.levels) {
        ASSERT_TRUE(l.response_time_median_ms);
        if (l.concurrency <= 32) EXPECT_LT(*l.response_time_median_ms, flat * 1.15);
    }
    // Beyond capacity each step adds 8 * 2 ms of modelled delay; allow 3 ms noise.
    for (std::size_t i = 5; i < r.levels.size(); ++i)
        EXPECT_GE(*r.levels[i].response_time_median_ms,
                  *r.levels[i - 1].response_time_median_ms - 3.0);
    EXPECT_GT(*r.levels.back().response_time_median_ms, flat + 40);
}

TEST_F(MockFixture, SequentialAndSustain) {
    start(fixed(10));
    LoadHarness h(target);
    const auto seq = h.run_sequential(5);
    ASSERT_EQ(seq.size(), 5u);
    mock->reset_stats();
    std::stop_source stop;
    std::jthread stopper([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        stop.request_stop();
    });
    const auto issued = h.sustain(4, stop.get_token());
    EXPECT_GE(issued, 4 * 10);
    EXPECT_LE(mock->stats().max_inflight, 4);
}
