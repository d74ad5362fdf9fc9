#pragma once

// JSON mapping for the domain types (nlohmann::json ADL hooks).
//
// Doubles are written in shortest round-trip form and timestamps as RFC 3339
// with nanoseconds, so to_json followed by from_json is exact.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "archeval/error.hpp"
#include "archeval/harness.hpp"
#include "archeval/metrics.hpp"
#include "archeval/mock.hpp"
#include "archeval/nrmt.hpp"
#include "archeval/sysload.hpp"
#include "archeval/target.hpp"
#include "archeval/timefmt.hpp"
#include "json.hpp"

namespace archeval {

using nlohmann::json;

namespace detail {

inline std::string base64_encode(std::string_view in) {
    static constexpr char tbl[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        const unsigned v = (static_cast<unsigned char>(in[i]) << 16) |
                           (static_cast<unsigned char>(in[i + 1]) << 8) |
                           static_cast<unsigned char>(in[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += tbl[v & 63];
    }
    if (i < in.size()) {
        unsigned v = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) v |= static_cast<unsigned char>(in[i + 1]) << 8;
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += i + 1 < in.size() ? tbl[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

inline std::string base64_decode(std::string_view in) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (in.size() % 4 != 0) throw InvalidArgument("base64 length is not a multiple of 4");
    std::string out;
    for (std::size_t i = 0; i < in.size(); i += 4) {
        unsigned v = 0;
        int pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = in[i + k];
            if (c == '=' && i + 4 == in.size() && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = val(c);
            if (d < 0 || pad) throw InvalidArgument("invalid base64 character");
            v = (v << 6) | static_cast<unsigned>(d);
        }
        out += static_cast<char>((v >> 16) & 0xff);
        if (pad < 2) out += static_cast<char>((v >> 8) & 0xff);
        if (pad < 1) out += static_cast<char>(v & 0xff);
    }
    return out;
}

template <class T>
std::optional<T> opt_at(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace detail

inline Outcome outcome_from_string(const std::string& s) {
    for (Outcome o : {Outcome::success, Outcome::timeout, Outcome::transport_error,
                      Outcome::http_error})
        if (to_string(o) == s) return o;
    throw InvalidArgument("unknown outcome '" + s + "'");
}

inline SensitivityMetric sensitivity_metric_from_string(const std::string& s) {
    for (SensitivityMetric m : kSensitivityMetrics)
        if (to_string(m) == s) return m;
    throw InvalidArgument("unknown sensitivity metric '" + s + "'");
}

// Timestamp: a std::chrono type, so it is mapped by explicit helpers.
inline json timestamp_json(Timestamp t) { return format_rfc3339(t); }
inline Timestamp timestamp_from_json(const json& j) { return parse_rfc3339(j.get<std::string>()); }

inline void to_json(json& j, const HsxInputs& v) {
    j = {{"time_minutes", v.time_minutes}, {"ease", v.ease}, {"cost_keur_month", v.cost_keur_month}};
}
inline void from_json(const json& j, HsxInputs& v) {
    j.at("time_minutes").get_to(v.time_minutes);
    j.at("ease").get_to(v.ease);
    j.at("cost_keur_month").get_to(v.cost_keur_month);
}

inline void to_json(json& j, const LoadSnapshot& v) {
    j = {{"load", v.intervals}, {"taken_at", timestamp_json(v.taken_at)}};
}
inline void from_json(const json& j, LoadSnapshot& v) {
    j.at("load").get_to(v.intervals);
    v.taken_at = timestamp_from_json(j.at("taken_at"));
}

inline void to_json(json& j, const ResponseSample& v) {
    j = {{"outcome", to_string(v.outcome)}, {"status", v.status}};
    j["elapsed_ms"] = v.elapsed_ms ? json(*v.elapsed_ms) : json(nullptr);
}
inline void from_json(const json& j, ResponseSample& v) {
    v.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    j.at("status").get_to(v.status);
    v.elapsed_ms = detail::opt_at<double>(j, "elapsed_ms");
}

inline void to_json(json& j, const MetricSet& v) {
    j = {{"nrmt", v.nrmt}, {"hsx_inputs", v.hsx_inputs}, {"hsx", v.hsx}, {"asl", v.asl},
         {"rtm_ms", v.rtm_ms}, {"n_r", v.n_r}, {"sc", v.sc}, {"pc", v.pc}};
}
inline void from_json(const json& j, MetricSet& v) {
    j.at("nrmt").get_to(v.nrmt);
    j.at("hsx_inputs").get_to(v.hsx_inputs);
    j.at("hsx").get_to(v.hsx);
    j.at("asl").get_to(v.asl);
    j.at("rtm_ms").get_to(v.rtm_ms);
    j.at("n_r").get_to(v.n_r);
    j.at("sc").get_to(v.sc);
    j.at("pc").get_to(v.pc);
}

inline void to_json(json& j, const EvaluationDelta& v) {
    j = {{"delta_s", v.delta_s}, {"delta_p", v.delta_p}, {"accepted", v.accepted}};
}
inline void from_json(const json& j, EvaluationDelta& v) {
    j.at("delta_s").get_to(v.delta_s);
    j.at("delta_p").get_to(v.delta_p);
    j.at("accepted").get_to(v.accepted);
}

inline void to_json(json& j, const SensitivityPoint& v) {
    j = {{"metric", to_string(v.varied_metric)}, {"relative_change", v.relative_change},
         {"sc", v.sc}, {"pc", v.pc}};
}
inline void from_json(const json& j, SensitivityPoint& v) {
    v.varied_metric = sensitivity_metric_from_string(j.at("metric").get<std::string>());
    j.at("relative_change").get_to(v.relative_change);
    j.at("sc").get_to(v.sc);
    j.at("pc").get_to(v.pc);
}

inline void to_json(json& j, const TargetSpec& v) {
    json headers = json::array();
    for (const auto& [k, val] : v.headers) headers.push_back({{"name", k}, {"value", val}});
    j = {{"protocol", to_string(v.protocol)}, {"endpoint", v.endpoint},
         {"http_method", v.http_method}, {"headers", headers},
         {"body_base64", detail::base64_encode(v.body)}, {"body_file", v.body_file},
         {"timeout_s", v.timeout_s}, {"tls", v.tls},
         {"grpc_service", v.grpc_service}, {"grpc_method", v.grpc_method}};
}
inline void from_json(const json& j, TargetSpec& v) {
    v.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    j.at("endpoint").get_to(v.endpoint);
    j.at("http_method").get_to(v.http_method);
    v.headers.clear();
    for (const auto& h : j.at("headers"))
        v.headers.emplace_back(h.at("name").get<std::string>(), h.at("value").get<std::string>());
    v.body = detail::base64_decode(j.at("body_base64").get<std::string>());
    j.at("body_file").get_to(v.body_file);
    j.at("timeout_s").get_to(v.timeout_s);
    j.at("tls").get_to(v.tls);
    j.at("grpc_service").get_to(v.grpc_service);
    j.at("grpc_method").get_to(v.grpc_method);
}

inline void to_json(json& j, const RampConfig& v) {
    j = {{"start", v.start}, {"max", v.max}, {"step", v.step},
         {"warmup_requests", v.warmup_requests}, {"rounds_per_level", v.rounds_per_level}};
}
inline void from_json(const json& j, RampConfig& v) {
    j.at("start").get_to(v.start);
    j.at("max").get_to(v.max);
    j.at("step").get_to(v.step);
    j.at("warmup_requests").get_to(v.warmup_requests);
    j.at("rounds_per_level").get_to(v.rounds_per_level);
}

inline void to_json(json& j, const LevelObservation& v) {
    j = {{"concurrency", v.concurrency}, {"rounds", v.rounds}, {"samples", v.samples},
         {"total_time_s", v.total_time_s}, {"success_count", v.success_count},
         {"failure_count", v.failure_count}, {"throughput_rps", v.throughput_rps},
         {"degenerate", v.degenerate}};
    j["response_time_median_ms"] =
        v.response_time_median_ms ? json(*v.response_time_median_ms) : json(nullptr);
}
inline void from_json(const json& j, LevelObservation& v) {
    j.at("concurrency").get_to(v.concurrency);
    j.at("rounds").get_to(v.rounds);
    j.at("samples").get_to(v.samples);
    v.response_time_median_ms = detail::opt_at<double>(j, "response_time_median_ms");
    j.at("total_time_s").get_to(v.total_time_s);
    j.at("success_count").get_to(v.success_count);
    j.at("failure_count").get_to(v.failure_count);
    j.at("throughput_rps").get_to(v.throughput_rps);
    j.at("degenerate").get_to(v.degenerate);
}

inline void to_json(json& j, const RampResult& v) {
    j = {{"ramp_config", v.ramp_config}, {"aborted_early", v.aborted_early}, {"levels", v.levels}};
}
inline void from_json(const json& j, RampResult& v) {
    j.at("ramp_config").get_to(v.ramp_config);
    j.at("aborted_early").get_to(v.aborted_early);
    j.at("levels").get_to(v.levels);
}

inline void to_json(json& j, const NrmtOptions& v) {
    j = {{"epsilon", v.epsilon}, {"confirm", v.confirm}, {"method", to_string(v.method)}};
}
inline void from_json(const json& j, NrmtOptions& v) {
    j.at("epsilon").get_to(v.epsilon);
    j.at("confirm").get_to(v.confirm);
    v.method = knee_method_from_string(j.at("method").get<std::string>());
}

inline void to_json(json& j, const NrmtFinding& v) {
    j = {{"nrmt", v.nrmt}, {"method", to_string(v.method)}, {"epsilon", v.epsilon},
         {"baseline_median_ms", v.baseline_median_ms}, {"saturated", v.saturated},
         {"ramp_step", v.ramp_step}};
}
inline void from_json(const json& j, NrmtFinding& v) {
    j.at("nrmt").get_to(v.nrmt);
    v.method = knee_method_from_string(j.at("method").get<std::string>());
    j.at("epsilon").get_to(v.epsilon);
    j.at("baseline_median_ms").get_to(v.baseline_median_ms);
    j.at("saturated").get_to(v.saturated);
    j.at("ramp_step").get_to(v.ramp_step);
}

inline void to_json(json& j, const ProbeConfig& v) {
    j = {{"source", to_string(v.source)}, {"agent_url", v.agent_urls},
         {"sample_interval_s", v.sample_interval_s}, {"duration_s", v.duration_s}};
}
inline void from_json(const json& j, ProbeConfig& v) {
    v.source = probe_source_from_string(j.at("source").get<std::string>());
    j.at("agent_url").get_to(v.agent_urls);
    j.at("sample_interval_s").get_to(v.sample_interval_s);
    j.at("duration_s").get_to(v.duration_s);
}

inline void to_json(json& j, const MockStats& v) {
    j = {{"max_inflight", v.max_inflight}, {"served", v.served}, {"errors", v.errors}};
}

/// Reads and parses a JSON file; failures name the file.
inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path.string(), "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::exception& e) {
        throw FileError(path.string(), std::string("invalid JSON: ") + e.what());
    }
}

/// Writes via a temporary file and rename, so readers never see half a file.
inline void write_json_file(const std::filesystem::path& path, const json& j, int indent = 1) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FileError(tmp.string(), "cannot open file for writing");
        out << j.dump(indent) << '\n';
        if (!out) throw FileError(tmp.string(), "write failed");
    }
    std::filesystem::rename(tmp, path);
}

/// Converts a parsed document into T; schema errors name the file.
template <class T>
T decode_file(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw FileError(path.string(), std::string("unexpected content: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FileError(path.string(), std::string("unexpected content: ") + e.what());
    }
}

}  // namespace archeval
