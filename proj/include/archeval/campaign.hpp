#pragma once

// Baseline-versus-candidates evaluation campaigns.
//
// Each system is measured in stages: ramp, nrmt, load (sustained load at
// NRMT while the probe samples), rtm (sequential requests), metrics. Raw
// stage data is written under <out>/raw/<system>/ as soon as a stage
// completes; campaign.json holds profiles, metrics, deltas and the result
// list. replay_from_record recomputes everything from the raw files.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "archeval/config.hpp"
#include "archeval/error.hpp"
#include "archeval/harness.hpp"
#include "archeval/json_io.hpp"
#include "archeval/metrics.hpp"
#include "archeval/nrmt.hpp"
#include "archeval/sysload.hpp"
#include "archeval/timefmt.hpp"

namespace archeval {

struct RawMeasurements {
    RampResult ramp;
    std::vector<LoadSnapshot> load;
    std::vector<ResponseSample> rtm_samples;

    bool operator==(const RawMeasurements&) const = default;
};

struct DerivedMetrics {
    MetricSet metrics;
    NrmtFinding nrmt;
};

/// Relative paths (from the campaign directory) of one system's raw files.
struct RawFiles {
    std::string ramp;
    std::string load;
    std::string rtm;

    bool operator==(const RawFiles&) const = default;
};

struct SystemOutcome {
    SystemProfile profile;
    std::optional<MetricSet> metrics;      // empty when measurement failed
    std::optional<NrmtFinding> nrmt;
    std::optional<EvaluationDelta> delta;  // candidates only
    std::string failed_stage;
    std::string error;
    RawFiles raw;

    bool failed() const { return !metrics.has_value(); }
    bool operator==(const SystemOutcome&) const = default;
};

struct CampaignRecord {
    std::string name;
    SystemOutcome baseline;
    std::vector<SystemOutcome> candidates;  // evaluation order
    std::vector<std::string> result_list;
    Timestamp started_at{};
    Timestamp finished_at{};

    bool operator==(const CampaignRecord&) const = default;
};

// JSON mapping ------------------------------------------------------------

inline void to_json(json& j, const RawMeasurements& v) {
    j = {{"ramp", v.ramp}, {"load", v.load}, {"rtm_samples", v.rtm_samples}};
}
inline void from_json(const json& j, RawMeasurements& v) {
    j.at("ramp").get_to(v.ramp);
    j.at("load").get_to(v.load);
    j.at("rtm_samples").get_to(v.rtm_samples);
}

inline void to_json(json& j, const RawFiles& v) {
    j = {{"ramp", v.ramp}, {"load", v.load}, {"rtm", v.rtm}};
}
inline void from_json(const json& j, RawFiles& v) {
    j.at("ramp").get_to(v.ramp);
    j.at("load").get_to(v.load);
    j.at("rtm").get_to(v.rtm);
}

inline void to_json(json& j, const SystemOutcome& v) {
    j = {{"profile", v.profile}, {"raw", v.raw}};
    j["metrics"] = v.metrics ? json(*v.metrics) : json(nullptr);
    j["nrmt_finding"] = v.nrmt ? json(*v.nrmt) : json(nullptr);
    j["delta"] = v.delta ? json(*v.delta) : json(nullptr);
    if (v.failed()) j["failure"] = {{"stage", v.failed_stage}, {"error", v.error}};
}
inline void from_json(const json& j, SystemOutcome& v) {
    j.at("profile").get_to(v.profile);
    j.at("raw").get_to(v.raw);
    v.metrics = detail::opt_at<MetricSet>(j, "metrics");
    v.nrmt = detail::opt_at<NrmtFinding>(j, "nrmt_finding");
    v.delta = detail::opt_at<EvaluationDelta>(j, "delta");
    v.failed_stage.clear();
    v.error.clear();
    if (j.contains("failure")) {
        j.at("failure").at("stage").get_to(v.failed_stage);
        j.at("failure").at("error").get_to(v.error);
    }
}

inline void to_json(json& j, const CampaignRecord& v) {
    j = {{"name", v.name},
         {"started_at", timestamp_json(v.started_at)},
         {"finished_at", timestamp_json(v.finished_at)},
         {"baseline", v.baseline},
         {"candidates", v.candidates},
         {"result_list", v.result_list}};
}
inline void from_json(const json& j, CampaignRecord& v) {
    j.at("name").get_to(v.name);
    v.started_at = timestamp_from_json(j.at("started_at"));
    v.finished_at = timestamp_from_json(j.at("finished_at"));
    j.at("baseline").get_to(v.baseline);
    j.at("candidates").get_to(v.candidates);
    j.at("result_list").get_to(v.result_list);
}

inline constexpr const char* kCampaignFile = "campaign.json";

/// Directory-safe form of a system name.
inline std::string system_slug(const std::string& name) {
    std::string s;
    for (unsigned char c : name)
        s += (std::isalnum(c) || c == '-' || c == '_' || c == '.') ? static_cast<char>(c) : '_';
    if (s.empty() || s == "." || s == "..") s = "_" + s;
    return s;
}

inline RawFiles raw_files_for(const std::string& system) {
    const std::string dir = "raw/" + system_slug(system) + "/";
    return {dir + "ramp.json", dir + "load.json", dir + "rtm.json"};
}

/// Persists stage data as it becomes available. A default-constructed sink
/// discards everything.
class RawSink {
public:
    RawSink() = default;
    RawSink(std::filesystem::path campaign_dir, const std::string& system)
        : dir_(std::move(campaign_dir)), files_(raw_files_for(system)) {}

    void ramp(const RampResult& r) const { write(files_.ramp, r); }
    void load(const std::vector<LoadSnapshot>& l) const { write(files_.load, l); }
    void rtm(const std::vector<ResponseSample>& s) const { write(files_.rtm, s); }

    /// Files that exist on disk, relative to the campaign directory.
    RawFiles written() const {
        RawFiles out;
        if (dir_.empty()) return out;
        auto keep = [&](const std::string& f) {
            return std::filesystem::exists(dir_ / f) ? f : std::string();
        };
        return {keep(files_.ramp), keep(files_.load), keep(files_.rtm)};
    }

private:
    template <class T>
    void write(const std::string& rel, const T& v) const {
        if (!dir_.empty()) write_json_file(dir_ / rel, json(v), -1);
    }

    std::filesystem::path dir_;
    RawFiles files_;
};

inline std::int64_t usable_levels(const RampResult& r) {
    std::int64_t n = 0;
    for (const auto& l : r.levels) n += l.degenerate ? 0 : 1;
    return n;
}

/// Pure computation of every metric from raw stage data.
inline DerivedMetrics derive_metrics(const SystemProfile& p, const RawMeasurements& raw) {
    DerivedMetrics d;
    if (usable_levels(raw.ramp) < 3)
        throw StageError("ramp", "only " + std::to_string(usable_levels(raw.ramp)) + " of " +
                                     std::to_string(raw.ramp.levels.size()) +
                                     " ramp levels had successful responses (need 3)");
    try {
        d.nrmt = detect_nrmt(raw.ramp, p.nrmt);
    } catch (const Error& e) {
        throw StageError("nrmt", e.what());
    }
    double asl;
    try {
        asl = compute_asl(raw.load);
    } catch (const Error& e) {
        throw StageError("load", e.what());
    }
    if (static_cast<std::int64_t>(raw.rtm_samples.size()) != p.rtm_requests)
        throw StageError("rtm", "expected " + std::to_string(p.rtm_requests) + " samples, found " +
                                    std::to_string(raw.rtm_samples.size()));
    double rtm;
    try {
        rtm = compute_rtm(raw.rtm_samples).median_ms;
    } catch (const Error& e) {
        throw StageError("rtm", e.what());
    }
    try {
        d.metrics = make_metric_set(d.nrmt.nrmt, p.hsx_inputs, asl, rtm, p.rtm_requests);
    } catch (const Error& e) {
        throw StageError("metrics", e.what());
    }
    return d;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace detail

/// Receives one line per measurement milestone.
using ProgressFn = std::function<void(const std::string&)>;

/// Runs the live measurement stages against the profile's target.
inline RawMeasurements measure_raw(const SystemProfile& p, const RawSink& sink = {},
                                   const ProgressFn& progress = {}) {
    validate(p);
    auto say = [&](const std::string& m) {
        if (progress) progress(p.name + ": " + m);
    };
    RawMeasurements raw;
    LoadHarness harness(p.target);

    say("ramp " + std::to_string(p.ramp.start) + ".." + std::to_string(p.ramp.max) + " step " +
        std::to_string(p.ramp.step));
    try {
        raw.ramp = harness.run_ramp(p.ramp, [&](const LevelObservation& l) {
            say("  c=" + std::to_string(l.concurrency) + " median " +
                (l.response_time_median_ms ? detail::fmt("%.2f ms", *l.response_time_median_ms)
                                           : std::string("n/a")) +
                " ok " + std::to_string(l.success_count) + "/" + std::to_string(l.samples.size()));
        });
    } catch (const Error& e) {
        throw StageError("ramp", e.what());
    }
    sink.ramp(raw.ramp);
    if (usable_levels(raw.ramp) < 3)
        throw StageError("ramp", "only " + std::to_string(usable_levels(raw.ramp)) + " of " +
                                     std::to_string(raw.ramp.levels.size()) +
                                     " ramp levels had successful responses (need 3); is " +
                                     request_url(p.target) + " reachable?");

    NrmtFinding finding;
    try {
        finding = detect_nrmt(raw.ramp, p.nrmt);
    } catch (const Error& e) {
        throw StageError("nrmt", e.what());
    }
    say("NRMT " + std::to_string(finding.nrmt));

    say("holding " + std::to_string(finding.nrmt) + " in flight while sampling load for " +
        detail::fmt("%g s", p.probe.duration_s));
    {
        std::stop_source stop;
        std::jthread peak([&] { (void)harness.sustain(finding.nrmt, stop.get_token()); });
        try {
            raw.load = collect_load(p.probe);
        } catch (const Error& e) {
            stop.request_stop();
            throw StageError("load", e.what());
        }
        stop.request_stop();
    }
    sink.load(raw.load);

    say(std::to_string(p.rtm_requests) + " sequential requests");
    raw.rtm_samples = harness.run_sequential(p.rtm_requests);
    sink.rtm(raw.rtm_samples);
    return raw;
}

struct MeasuredSystem {
    RawMeasurements raw;
    DerivedMetrics derived;
};

/// Live measurement followed by metric derivation. With a non-empty
/// `campaign_dir`, raw stage files are written as each stage completes.
inline MeasuredSystem measure_system(const SystemProfile& p,
                                     const std::filesystem::path& campaign_dir = {},
                                     const ProgressFn& progress = {}) {
    const RawSink sink = campaign_dir.empty() ? RawSink{} : RawSink(campaign_dir, p.name);
    MeasuredSystem m;
    m.raw = measure_raw(p, sink, progress);
    m.derived = derive_metrics(p, m.raw);
    return m;
}

/// Produces raw data for one system. The live implementation is measure_raw;
/// tests substitute recorded data.
using Measurer = std::function<RawMeasurements(const SystemProfile&, const RawSink&)>;

inline Measurer live_measurer(ProgressFn progress = {}) {
    return [progress](const SystemProfile& p, const RawSink& sink) {
        return measure_raw(p, sink, progress);
    };
}

/// Campaign-level preconditions, checked before any traffic.
inline void validate_campaign(const SystemProfile& baseline,
                              const std::vector<SystemProfile>& candidates) {
    std::set<std::string> names, slugs;
    auto check = [&](const SystemProfile& p) {
        validate(p);
        if (!names.insert(p.name).second)
            throw InvalidArgument("system name '" + p.name + "' is used more than once");
        if (!slugs.insert(system_slug(p.name)).second)
            throw InvalidArgument("system name '" + p.name +
                                  "' maps to the same raw directory as another system");
        if (p.rtm_requests != baseline.rtm_requests)
            throw InvalidArgument("rtm_requests differs between '" + baseline.name + "' (" +
                                  std::to_string(baseline.rtm_requests) + ") and '" + p.name +
                                  "' (" + std::to_string(p.rtm_requests) +
                                  "); N_r must be the same for every system");
    };
    check(baseline);
    for (const auto& c : candidates) check(c);
}

namespace detail {

inline SystemOutcome measure_outcome(const SystemProfile& p, const Measurer& measure,
                                     const std::filesystem::path& out_dir) {
    SystemOutcome o;
    o.profile = p;
    const RawSink sink = out_dir.empty() ? RawSink{} : RawSink(out_dir, p.name);
    const RawMeasurements raw = measure(p, sink);
    sink.ramp(raw.ramp);
    sink.load(raw.load);
    sink.rtm(raw.rtm_samples);
    o.raw = sink.written();
    const auto d = derive_metrics(p, raw);
    o.metrics = d.metrics;
    o.nrmt = d.nrmt;
    return o;
}

}  // namespace detail

inline void write_record(const std::filesystem::path& dir, const CampaignRecord& r) {
    write_json_file(dir / kCampaignFile, json(r));
}

/// Measures the baseline, then every candidate in order. A failing candidate
/// is recorded with its stage and error and left out of the result list; a
/// failing baseline aborts the campaign.
inline CampaignRecord run_campaign(const std::string& name, const SystemProfile& baseline,
                                   const std::vector<SystemProfile>& candidates,
                                   const Measurer& measure,
                                   const std::filesystem::path& out_dir = {}) {
    validate_campaign(baseline, candidates);
    CampaignRecord rec;
    rec.name = name;
    rec.started_at = now_timestamp();

    rec.baseline = detail::measure_outcome(baseline, measure, out_dir);

    for (const auto& c : candidates) {
        SystemOutcome o;
        try {
            o = detail::measure_outcome(c, measure, out_dir);
            o.delta = evaluate_pattern(*rec.baseline.metrics, *o.metrics);
            if (o.delta->accepted) rec.result_list.push_back(c.name);
        } catch (const Error& e) {
            o = SystemOutcome{};
            o.profile = c;
            o.error = e.what();
            const auto* se = dynamic_cast<const StageError*>(&e);
            o.failed_stage = se ? se->stage() : "measure";
            if (!out_dir.empty()) o.raw = RawSink(out_dir, c.name).written();
        }
        rec.candidates.push_back(std::move(o));
    }
    rec.finished_at = now_timestamp();
    if (!out_dir.empty()) write_record(out_dir, rec);
    return rec;
}

inline CampaignRecord run_campaign(const CampaignConfig& cfg, const Measurer& measure,
                                   const std::filesystem::path& out_dir = {}) {
    return run_campaign(cfg.name, cfg.baseline_profile(), cfg.candidates(), measure, out_dir);
}

// Replay ------------------------------------------------------------------

struct ReplayResult {
    CampaignRecord stored;
    CampaignRecord recomputed;
    std::vector<std::string> mismatches;

    bool identical() const { return mismatches.empty(); }
};

inline CampaignRecord load_record(const std::filesystem::path& dir) {
    return decode_file<CampaignRecord>(dir / kCampaignFile);
}

inline RawMeasurements load_raw(const std::filesystem::path& dir, const RawFiles& files) {
    auto need = [&](const std::string& rel, const char* what) {
        if (rel.empty())
            throw FileError((dir / "raw").string(), std::string("record lists no ") + what + " file");
        const auto p = dir / rel;
        if (!std::filesystem::exists(p)) throw FileError(p.string(), "raw file is missing");
        return p;
    };
    RawMeasurements raw;
    raw.ramp = decode_file<RampResult>(need(files.ramp, "ramp"));
    raw.load = decode_file<std::vector<LoadSnapshot>>(need(files.load, "load"));
    raw.rtm_samples = decode_file<std::vector<ResponseSample>>(need(files.rtm, "rtm"));
    return raw;
}

namespace detail {

inline std::string exact(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

inline void diff_metrics(const std::string& who, const MetricSet& a, const MetricSet& b,
                         std::vector<std::string>& out) {
    auto cmp = [&](const char* field, double x, double y) {
        if (x != y)
            out.push_back(who + ": " + field + " stored " + exact(x) + ", recomputed " + exact(y));
    };
    cmp("nrmt", static_cast<double>(a.nrmt), static_cast<double>(b.nrmt));
    cmp("hsx", a.hsx, b.hsx);
    cmp("asl", a.asl, b.asl);
    cmp("rtm_ms", a.rtm_ms, b.rtm_ms);
    cmp("n_r", static_cast<double>(a.n_r), static_cast<double>(b.n_r));
    cmp("sc", a.sc, b.sc);
    cmp("pc", a.pc, b.pc);
    if (a.hsx_inputs != b.hsx_inputs) out.push_back(who + ": hsx inputs differ");
}

}  // namespace detail

/// Recomputes every metric, delta and the result list from the raw files of
/// a stored campaign and reports each difference from the stored record.
inline ReplayResult replay_from_record(const std::filesystem::path& dir) {
    ReplayResult r;
    r.stored = load_record(dir);
    r.recomputed = r.stored;
    auto& out = r.mismatches;

    auto redo = [&](SystemOutcome& o, const std::string& who) {
        const auto raw = load_raw(dir, o.raw);
        DerivedMetrics d;
        try {
            d = derive_metrics(o.profile, raw);
        } catch (const StageError& e) {
            out.push_back(who + ": recomputation failed: " + e.what());
            return false;
        }
        if (o.metrics) detail::diff_metrics(who, *o.metrics, d.metrics, out);
        if (o.nrmt && *o.nrmt != d.nrmt) out.push_back(who + ": NRMT finding differs");
        o.metrics = d.metrics;
        o.nrmt = d.nrmt;
        return true;
    };

    if (r.stored.baseline.failed())
        throw FileError((dir / kCampaignFile).string(), "baseline has no metrics");
    if (!redo(r.recomputed.baseline, r.stored.baseline.profile.name))
        throw Error("cannot recompute the baseline: " + out.back());

    r.recomputed.result_list.clear();
    for (auto& c : r.recomputed.candidates) {
        if (c.failed()) continue;
        if (!redo(c, c.profile.name)) continue;
        const auto delta = evaluate_pattern(*r.recomputed.baseline.metrics, *c.metrics);
        if (!c.delta || *c.delta != delta)
            out.push_back(c.profile.name + ": delta differs (stored " +
                          (c.delta ? "dS " + detail::exact(c.delta->delta_s) + " dP " +
                                         detail::exact(c.delta->delta_p)
                                   : std::string("none")) +
                          ", recomputed dS " + detail::exact(delta.delta_s) + " dP " +
                          detail::exact(delta.delta_p) + ")");
        c.delta = delta;
        if (delta.accepted) r.recomputed.result_list.push_back(c.profile.name);
    }
    if (r.recomputed.result_list != r.stored.result_list) out.push_back("result_list differs");
    return r;
}

}  // namespace archeval
