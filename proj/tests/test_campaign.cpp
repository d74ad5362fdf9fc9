#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "archeval/campaign.hpp"
#include "archeval/mock.hpp"
#include "fixtures.hpp"

using namespace archeval;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    TempDir() {
        path = fs::temp_directory_path() /
               ("archeval-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    fs::path path;
};

CampaignRecord reference_campaign(const fs::path& out = {}) {
    return run_campaign("reference", fixtures::system_a(), {fixtures::system_b(), fixtures::system_c()},
                        fixtures::recorded_measurer(fixtures::reference_recordings()), out);
}

}  // namespace

TEST(Derive, ReconstructsBaselineFromRawInputs) {
    const auto p = fixtures::system_a();
    const auto d = derive_metrics(p, fixtures::make_raw({256, 6.57, 460}, 1000));
    EXPECT_EQ(d.metrics.nrmt, 256);
    EXPECT_EQ(d.nrmt.ramp_step, 16);
    EXPECT_NEAR(d.metrics.asl, 6.57, 1e-12);
    EXPECT_EQ(d.metrics.rtm_ms, 460.0);
    // 256 / (60 * 2 * 0.20) / 6.57 and 1000 / 460
    EXPECT_NEAR(d.metrics.sc, 256.0 / 24.0 / 6.57, 1e-9);
    // Quoted elsewhere as 1.6236; the exact value is 1.623541.
    EXPECT_NEAR(d.metrics.sc, 1.6236, 1e-4);
    EXPECT_NEAR(d.metrics.pc, 2.1739, 5e-5);
}

TEST(Derive, StageTaggedErrors) {
    const auto p = fixtures::system_a();
    auto raw = fixtures::make_raw({256, 6.57, 460}, 1000);
    raw.rtm_samples.pop_back();
    try {
        (void)derive_metrics(p, raw);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "rtm");
    }
    raw = fixtures::make_raw({256, 6.57, 460}, 1000);
    raw.load.clear();
    try {
        (void)derive_metrics(p, raw);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
    }
    raw = fixtures::make_raw({256, 6.57, 460}, 1000);
    raw.ramp.levels.resize(2);
    try {
        (void)derive_metrics(p, raw);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "ramp");
    }
}

TEST(Campaign, ReferenceFixturesAcceptBothCandidates) {
    const auto rec = reference_campaign();
    EXPECT_EQ(rec.result_list, (std::vector<std::string>{"System B", "System C"}));
    ASSERT_EQ(rec.candidates.size(), 2u);
    const auto& b = *rec.candidates[0].delta;
    const auto& c = *rec.candidates[1].delta;
    EXPECT_NEAR(b.delta_s, 256.0 / 6.0 / 6.12 - 256.0 / 24.0 / 6.57, 1e-9);
    EXPECT_NEAR(b.delta_s, 5.348, 1e-3);
    EXPECT_EQ(b.delta_p, 0.0);
    EXPECT_NEAR(c.delta_s, 0.314, 1e-3);
    EXPECT_NEAR(c.delta_p, 0.683, 1e-3);
    EXPECT_LE(rec.started_at, rec.finished_at);
}

TEST(Campaign, IdenticalCandidateIsRejected) {
    auto data = fixtures::reference_recordings();
    data["Copy"] = data["System A"];
    auto copy = fixtures::system_a();
    copy.name = "Copy";
    const auto rec = run_campaign("same", fixtures::system_a(), {copy},
                                  fixtures::recorded_measurer(data));
    EXPECT_EQ(rec.candidates[0].delta->delta_s, 0.0);
    EXPECT_EQ(rec.candidates[0].delta->delta_p, 0.0);
    EXPECT_TRUE(rec.result_list.empty());
}

TEST(Campaign, OppositeDirectionsAreRejected) {
    auto data = fixtures::reference_recordings();
    data["Faster but heavier"] = {256, 9.0, 300};  // PC up, SC down
    auto cand = fixtures::system_a();
    cand.name = "Faster but heavier";
    const auto rec = run_campaign("tradeoff", fixtures::system_a(), {cand},
                                  fixtures::recorded_measurer(data));
    EXPECT_GT(rec.candidates[0].delta->delta_p, 0.0);
    EXPECT_LT(rec.candidates[0].delta->delta_s, 0.0);
    EXPECT_TRUE(rec.result_list.empty());
}

TEST(Campaign, MixedRequestCountsRejectedBeforeTraffic) {
    int calls = 0;
    Measurer counting = [&](const SystemProfile& p, const RawSink& s) {
        ++calls;
        return fixtures::recorded_measurer(fixtures::reference_recordings())(p, s);
    };
    auto b = fixtures::system_b();
    b.rtm_requests = 500;
    EXPECT_THROW(run_campaign("mixed", fixtures::system_a(), {b}, counting), InvalidArgument);
    EXPECT_THROW(run_campaign("dup", fixtures::system_a(), {fixtures::system_a()}, counting),
                 InvalidArgument);
    EXPECT_EQ(calls, 0);
}

TEST(Campaign, FailingCandidateIsRecordedAndExcluded) {
    auto broken = fixtures::system_b();
    broken.name = "Broken";
    const auto rec = run_campaign("with failure", fixtures::system_a(),
                                  {broken, fixtures::system_c()},
                                  fixtures::recorded_measurer(fixtures::reference_recordings()));
    ASSERT_EQ(rec.candidates.size(), 2u);
    EXPECT_TRUE(rec.candidates[0].failed());
    EXPECT_EQ(rec.candidates[0].failed_stage, "ramp");
    EXPECT_NE(rec.candidates[0].error.find("Broken"), std::string::npos);
    EXPECT_EQ(rec.result_list, (std::vector<std::string>{"System C"}));
}

TEST(Campaign, FailingBaselineAborts) {
    auto base = fixtures::system_a();
    base.name = "Nowhere";
    EXPECT_THROW(run_campaign("x", base, {fixtures::system_b()},
                              fixtures::recorded_measurer(fixtures::reference_recordings())),
                 StageError);
}

TEST(Campaign, MembershipIgnoresCandidateOrder) {
    auto data = fixtures::reference_recordings();
    data["D"] = {200, 7.0, 500};  // worse on both
    data["E"] = {300, 6.57, 460};  // better SC only
    std::vector<SystemProfile> cands = {fixtures::system_b(), fixtures::system_c(),
                                        fixtures::profile("D", {60, 2, 0.20}),
                                        fixtures::profile("E", {60, 2, 0.20})};
    std::sort(cands.begin(), cands.end(),
              [](const auto& x, const auto& y) { return x.name < y.name; });
    std::set<std::string> expected;
    bool first = true;
    do {
        const auto rec = run_campaign("perm", fixtures::system_a(), cands,
                                      fixtures::recorded_measurer(data));
        std::set<std::string> got(rec.result_list.begin(), rec.result_list.end());
        if (first) expected = got;
        first = false;
        EXPECT_EQ(got, expected);
        // Evaluation order is preserved.
        std::vector<std::string> order;
        for (const auto& c : cands)
            if (got.count(c.name)) order.push_back(c.name);
        EXPECT_EQ(rec.result_list, order);
    } while (std::next_permutation(cands.begin(), cands.end(), [](const auto& x, const auto& y) {
        return x.name < y.name;
    }));
    EXPECT_EQ(expected, (std::set<std::string>{"E", "System B", "System C"}));
}

TEST(Campaign, PersistedMetricsSatisfyFormulas) {
    const auto rec = reference_campaign();
    std::vector<const SystemOutcome*> all{&rec.baseline};
    for (const auto& c : rec.candidates) all.push_back(&c);
    for (const auto* s : all) {
        const auto& m = *s->metrics;
        const double hsx = 1.0 / (m.hsx_inputs.time_minutes * m.hsx_inputs.ease *
                                  m.hsx_inputs.cost_keur_month);
        EXPECT_NEAR(m.hsx, hsx, 1e-9 * hsx);
        EXPECT_NEAR(m.sc, m.nrmt * hsx / m.asl, 1e-9 * m.sc);
        EXPECT_NEAR(m.pc, m.n_r / m.rtm_ms, 1e-9 * m.pc);
    }
}

TEST(Persistence, RecordJsonRoundTrips) {
    const auto rec = reference_campaign();
    const json j = rec;
    EXPECT_EQ(j.get<CampaignRecord>(), rec);
    EXPECT_EQ(json::parse(j.dump()).get<CampaignRecord>(), rec);
}

TEST(Persistence, ReplayReproducesEverything) {
    TempDir dir;
    const auto rec = reference_campaign(dir.path);
    EXPECT_TRUE(fs::exists(dir.path / "campaign.json"));
    EXPECT_TRUE(fs::exists(dir.path / "raw" / "System_B" / "rtm.json"));
    EXPECT_EQ(load_record(dir.path), rec);
    const auto r = replay_from_record(dir.path);
    EXPECT_TRUE(r.identical()) << (r.mismatches.empty() ? "" : r.mismatches.front());
    EXPECT_EQ(r.recomputed, rec);
}

TEST(Persistence, MissingRawFileIsNamed) {
    TempDir dir;
    (void)reference_campaign(dir.path);
    const auto victim = dir.path / "raw" / "System_C" / "load.json";
    fs::remove(victim);
    try {
        (void)replay_from_record(dir.path);
        FAIL() << "expected a file error";
    } catch (const FileError& e) {
        EXPECT_EQ(e.path(), victim.string());
    }
}

TEST(Persistence, CorruptRawFileIsNamed) {
    TempDir dir;
    (void)reference_campaign(dir.path);
    const auto victim = dir.path / "raw" / "System_A" / "ramp.json";
    std::ofstream(victim) << "{\"levels\": [";
    try {
        (void)replay_from_record(dir.path);
        FAIL() << "expected a file error";
    } catch (const FileError& e) {
        EXPECT_EQ(e.path(), victim.string());
    }
}

TEST(Persistence, AlteredRtmSamplesAreFlagged) {
    TempDir dir;
    (void)reference_campaign(dir.path);
    const auto file = dir.path / "raw" / "System_C" / "rtm.json";
    auto samples = read_json_file(file).get<std::vector<ResponseSample>>();
    for (auto& s : samples) s.elapsed_ms = 400.0;
    write_json_file(file, json(samples));
    const auto r = replay_from_record(dir.path);
    EXPECT_FALSE(r.identical());
    const bool pc_flagged = std::any_of(r.mismatches.begin(), r.mismatches.end(), [](const auto& m) {
        return m.find("System C: pc") != std::string::npos;
    });
    EXPECT_TRUE(pc_flagged);
    EXPECT_NEAR(r.recomputed.candidates[1].metrics->pc, 2.5, 1e-12);
}

TEST(Measure, UnreachableTargetFailsAtRampStage) {
    int port;
    {
        MockServer m(MockProfile{});
        m.start({"127.0.0.1", 0});
        port = m.http_port();
    }
    TempDir dir;
    auto p = fixtures::system_a();
    p.target.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/predict";
    p.target.timeout_s = 1;
    p.ramp = RampConfig{10, 50, 10, 1, 1};
    try {
        (void)measure_system(p, dir.path);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "ramp");
    }
    // Partial raw data survives.
    EXPECT_TRUE(fs::exists(dir.path / "raw" / "System_A" / "ramp.json"));
    EXPECT_FALSE(fs::exists(dir.path / "raw" / "System_A" / "rtm.json"));
}

TEST(Measure, MockTargetEndToEnd) {
    MockProfile mp;
    mp.base_delay_ms = 50;
    mp.jitter_ms = 2;
    mp.capacity = 64;
    mp.overload_slope_ms = 2;
    mp.emulated_load = {4.0, 4.0, 4.0};
    MockServer mock(mp);
    mock.start({"127.0.0.1", 0});

    auto p = fixtures::system_a();
    p.target.endpoint = mock.predict_url();
    p.ramp = RampConfig{10, 150, 10, 50, 5};
    p.probe.source = ProbeSource::agent;
    p.probe.agent_urls = {mock.base_url()};
    p.probe.sample_interval_s = 0.5;
    p.probe.duration_s = 1.0;
    p.rtm_requests = 100;

    TempDir dir;
    const auto m = measure_system(p, dir.path);
    const auto& ms = m.derived.metrics;
    EXPECT_TRUE(ms.nrmt == 60 || ms.nrmt == 70) << ms.nrmt;
    EXPECT_GE(ms.rtm_ms, 48.0);
    EXPECT_LE(ms.rtm_ms, 65.0);
    EXPECT_DOUBLE_EQ(ms.asl, 4.0);
    EXPECT_EQ(m.raw.load.size(), 2u);
    EXPECT_NEAR(ms.sc, ms.nrmt * ms.hsx / ms.asl, 1e-12);
    EXPECT_NEAR(ms.pc, 100.0 / ms.rtm_ms, 1e-12);
    for (const char* f : {"ramp.json", "load.json", "rtm.json"})
        EXPECT_TRUE(fs::exists(dir.path / "raw" / "System_A" / f)) << f;
}
