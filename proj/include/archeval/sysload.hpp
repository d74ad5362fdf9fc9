#pragma once

// System load sampling: 1/5/15-minute load averages, read either from the
// local host or from a remote load agent over HTTP.

#include <stdlib.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "archeval/client.hpp"
#include "archeval/error.hpp"
#include "archeval/metrics.hpp"
#include "archeval/net.hpp"
#include "archeval/timefmt.hpp"
#include "httplib.h"
#include "json.hpp"

namespace archeval {

enum class ProbeSource { local, agent };

inline std::string to_string(ProbeSource s) { return s == ProbeSource::local ? "local" : "agent"; }

inline ProbeSource probe_source_from_string(const std::string& s) {
    if (s == "local") return ProbeSource::local;
    if (s == "agent") return ProbeSource::agent;
    throw InvalidArgument("unknown probe source '" + s + "'");
}

struct ProbeConfig {
    ProbeSource source = ProbeSource::local;
    std::vector<std::string> agent_urls;  // one per target host
    double sample_interval_s = 30;
    double duration_s = 300;

    bool operator==(const ProbeConfig&) const = default;
};

inline void validate(const ProbeConfig& c) {
    if (!(c.sample_interval_s > 0)) throw InvalidArgument("probe sample_interval_s must be positive");
    if (!(c.duration_s > 0)) throw InvalidArgument("probe duration_s must be positive");
    if (c.duration_s < c.sample_interval_s)
        throw InvalidArgument("probe duration_s must be at least sample_interval_s");
    if (c.source == ProbeSource::agent && c.agent_urls.empty())
        throw InvalidArgument("probe source 'agent' needs agent_url");
    for (const auto& u : c.agent_urls)
        if (u.empty()) throw InvalidArgument("probe agent_url must not be empty");
}

/// Number of ticks in a schedule: floor(duration / interval).
inline std::int64_t snapshot_ticks(const ProbeConfig& c) {
    return static_cast<std::int64_t>(std::floor(c.duration_s / c.sample_interval_s + 1e-9));
}

/// Reads the local 1/5/15-minute load averages.
inline std::vector<double> local_load_average() {
    double v[3];
    if (::getloadavg(v, 3) != 3)
        throw Unsupported("load averages are not available on this host");
    return {v[0], v[1], v[2]};
}

/// A load agent answered, but not in the expected wire format.
class AgentResponseError : public Error {
public:
    using Error::Error;
};

/// Parses the agent wire format {"load": [l1, l5, l15], "taken_at": "..."}.
inline LoadSnapshot parse_load_response(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw AgentResponseError(std::string("load agent response is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("load"))
        throw AgentResponseError("load agent response has no 'load' field");
    const auto& load = j["load"];
    if (!load.is_array() || load.size() != 3)
        throw AgentResponseError("load agent 'load' field must be an array of 3 numbers");
    LoadSnapshot s;
    for (const auto& v : load) {
        if (!v.is_number()) throw AgentResponseError("load agent 'load' field contains a non-number");
        const double d = v.get<double>();
        if (!(d >= 0)) throw AgentResponseError("load agent reported a negative load value");
        s.intervals.push_back(d);
    }
    s.taken_at = now_timestamp();
    return s;
}

inline std::string loadavg_url(std::string agent_url) {
    while (!agent_url.empty() && agent_url.back() == '/') agent_url.pop_back();
    if (agent_url.find("://") == std::string::npos) agent_url = "http://" + agent_url;
    return agent_url + "/loadavg";
}

/// One request to an agent, retried 3 times on transport or status errors.
inline LoadSnapshot fetch_agent_load(const std::string& agent_url, double timeout_s = 5.0) {
    const std::string url = loadavg_url(agent_url);
    std::string last;
    auto backoff = std::chrono::milliseconds(100);
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        try {
            const auto r = http_get(url, timeout_s);
            if (r.status == 200) return parse_load_response(r.body);
            last = "HTTP status " + std::to_string(r.status);
        } catch (const AgentResponseError&) {
            throw;  // a malformed body will not improve on retry
        } catch (const Error& e) {
            last = e.what();
        }
    }
    throw Error("load agent " + url + " unreachable after 3 retries: " + last);
}

/// Takes one sample per tick over the configured duration. Each tick yields
/// one snapshot per agent (or one local snapshot). Returns early with what
/// was collected when `stop` is requested.
inline std::vector<LoadSnapshot> collect_load(const ProbeConfig& cfg, std::stop_token stop = {}) {
    validate(cfg);
    if (cfg.source == ProbeSource::local) (void)local_load_average();

    std::vector<LoadSnapshot> out;
    const auto ticks = snapshot_ticks(cfg);
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(cfg.sample_interval_s));
    const auto t0 = std::chrono::steady_clock::now();
    std::mutex mu;
    std::condition_variable_any cv;
    for (std::int64_t k = 1; k <= ticks; ++k) {
        {
            std::unique_lock lk(mu);
            if (cv.wait_until(lk, stop, t0 + k * interval, [] { return false; }) ||
                stop.stop_requested())
                break;
        }
        if (cfg.source == ProbeSource::local) {
            out.push_back({local_load_average(), now_timestamp()});
        } else {
            for (const auto& url : cfg.agent_urls) out.push_back(fetch_agent_load(url));
        }
    }
    return out;
}

/// HTTP service exposing this host's load averages.
class LoadAgent {
public:
    LoadAgent() = default;
    LoadAgent(const LoadAgent&) = delete;
    LoadAgent& operator=(const LoadAgent&) = delete;
    ~LoadAgent() { stop(); }

    /// Returns the bound port. Throws when the address is in use.
    int start(const BindAddress& bind) {
        (void)local_load_average();
        http_.set_socket_options(exclusive_listen_options);
        http_.Get("/loadavg", [](const httplib::Request&, httplib::Response& res) {
            nlohmann::json j;
            try {
                j["load"] = local_load_average();
            } catch (const Unsupported& e) {
                res.status = 500;
                res.set_content(e.what(), "text/plain");
                return;
            }
            j["taken_at"] = format_rfc3339(now_timestamp());
            res.set_content(j.dump(), "application/json");
        });
        http_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.status = 200;
        });
        port_ = bind.port == 0 ? http_.bind_to_any_port(bind.host)
                               : (http_.bind_to_port(bind.host, bind.port) ? bind.port : -1);
        if (port_ <= 0) throw Error("cannot bind load agent on " + bind.to_string());
        host_ = bind.host;
        thread_ = std::thread([this] { http_.listen_after_bind(); });
        http_.wait_until_ready();
        return port_;
    }

    void stop() {
        http_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const noexcept { return port_; }
    std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

private:
    httplib::Server http_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int port_ = 0;
};

}  // namespace archeval
