#pragma once

// Inference-like mock server with a known latency/capacity model.
//
// A request that arrives while n requests (itself included) are in flight
// is held for
//
//   base_delay_ms + max(0, n - capacity) * overload_slope_ms + jitter
//
// where jitter is uniform in [-jitter_ms, +jitter_ms] and depends only on
// (seed, arrival index). The wait is a timed condition-variable wait.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "archeval/error.hpp"
#include "archeval/grpc_server.hpp"
#include "archeval/net.hpp"
#include "archeval/timefmt.hpp"
#include "httplib.h"
#include "json.hpp"

namespace archeval {

struct MockProfile {
    double base_delay_ms = 50;
    double jitter_ms = 0;
    std::int64_t capacity = 64;
    double overload_slope_ms = 0;
    std::array<double, 3> emulated_load{0, 0, 0};
    std::uint64_t seed = 7;

    bool operator==(const MockProfile&) const = default;
};

inline void validate(const MockProfile& p) {
    if (!(p.base_delay_ms > 0)) throw InvalidArgument("mock base_delay_ms must be positive");
    if (!(p.jitter_ms >= 0)) throw InvalidArgument("mock jitter_ms must be non-negative");
    if (p.capacity < 1) throw InvalidArgument("mock capacity must be positive");
    if (!(p.overload_slope_ms >= 0))
        throw InvalidArgument("mock overload_slope_ms must be non-negative");
    for (double l : p.emulated_load)
        if (!(l >= 0)) throw InvalidArgument("mock emulated load values must be non-negative");
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Service time for the `arrival_index`-th request seen while `in_flight`
/// requests (including it) are active.
inline double mock_delay_ms(const MockProfile& p, std::int64_t in_flight,
                            std::uint64_t arrival_index) {
    double d = p.base_delay_ms;
    if (in_flight > p.capacity)
        d += static_cast<double>(in_flight - p.capacity) * p.overload_slope_ms;
    if (p.jitter_ms > 0) {
        const std::uint64_t bits = detail::splitmix64(p.seed ^ detail::splitmix64(arrival_index));
        const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
        d += (2.0 * u - 1.0) * p.jitter_ms;
    }
    return std::max(0.0, d);
}

struct MockStats {
    std::int64_t max_inflight = 0;
    std::int64_t served = 0;
    std::int64_t errors = 0;
};

class MockServer {
public:
    explicit MockServer(MockProfile profile) : profile_(profile) { validate(profile_); }
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;
    ~MockServer() { stop(); }

    /// Starts the HTTP front (and the gRPC front when `grpc_bind` is given).
    /// Port 0 picks a free port. Throws when an address is in use.
    void start(const BindAddress& http_bind, std::optional<BindAddress> grpc_bind = std::nullopt) {
        setup_routes();
        const int port = http_bind.port == 0
                             ? http_.bind_to_any_port(http_bind.host)
                             : (http_.bind_to_port(http_bind.host, http_bind.port) ? http_bind.port
                                                                                    : -1);
        if (port <= 0) throw Error("cannot bind mock HTTP listener on " + http_bind.to_string());
        http_port_ = port;
        host_ = http_bind.host;
        http_thread_ = std::thread([this] { http_.listen_after_bind(); });
        http_.wait_until_ready();

        if (grpc_bind) {
            grpc_ = std::make_unique<GrpcUnaryServer>([this](std::string_view) {
                if (!serve_one()) return GrpcReply{14, {}};  // UNAVAILABLE
                return GrpcReply{0, std::string("\x0a\x02ok", 4)};
            });
            try {
                grpc_port_ = grpc_->start(*grpc_bind);
            } catch (...) {
                stop();
                throw;
            }
        }
    }

    void stop() {
        {
            std::lock_guard lk(stop_mu_);
            if (stopping_) return;
            stopping_ = true;
        }
        stop_cv_.notify_all();
        if (grpc_) grpc_->stop();
        http_.stop();
        if (http_thread_.joinable()) http_thread_.join();
    }

    int http_port() const noexcept { return http_port_; }
    int grpc_port() const noexcept { return grpc_port_; }
    std::string base_url() const { return "http://" + host_ + ":" + std::to_string(http_port_); }
    std::string predict_url() const { return base_url() + "/predict"; }
    const MockProfile& profile() const noexcept { return profile_; }

    MockStats stats() const {
        return {max_inflight_.load(), served_.load(), errors_.load()};
    }

    void reset_stats() {
        max_inflight_ = inflight_.load();
        served_ = 0;
        errors_ = 0;
    }

private:
    /// Holds the caller for the modelled service time. Returns false if the
    /// server is shutting down.
    bool serve_one() {
        const auto arrived = std::chrono::steady_clock::now();
        const std::int64_t n = ++inflight_;
        std::int64_t seen = max_inflight_.load();
        while (n > seen && !max_inflight_.compare_exchange_weak(seen, n)) {
        }
        const std::uint64_t index = arrivals_++;
        const double delay = mock_delay_ms(profile_, n, index);
        const auto deadline =
            arrived + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double, std::milli>(delay));
        bool interrupted;
        {
            std::unique_lock lk(stop_mu_);
            interrupted = stop_cv_.wait_until(lk, deadline, [this] { return stopping_; });
        }
        --inflight_;
        if (interrupted) {
            ++errors_;
            return false;
        }
        ++served_;
        return true;
    }

    void setup_routes() {
        http_.new_task_queue = [] { return new httplib::ThreadPool(1024); };
        http_.set_keep_alive_max_count(1000000);
        http_.set_keep_alive_timeout(30);
        http_.set_tcp_nodelay(true);
        http_.set_socket_options(exclusive_listen_options);

        auto predict = [this](const httplib::Request&, httplib::Response& res) {
            if (!serve_one()) {
                res.status = 503;
                return;
            }
            res.set_content(R"({"prediction":[0.0],"model":"mock"})", "application/json");
        };
        http_.Post("/predict", predict);
        http_.Get("/predict", predict);
        http_.Get("/loadavg", [this](const httplib::Request&, httplib::Response& res) {
            nlohmann::json j;
            j["load"] = profile_.emulated_load;
            j["taken_at"] = format_now();
            res.set_content(j.dump(), "application/json");
        });
        http_.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
            const auto s = stats();
            nlohmann::json j{{"max_inflight", s.max_inflight},
                             {"served", s.served},
                             {"errors", s.errors}};
            res.set_content(j.dump(), "application/json");
        });
        http_.Post("/stats/reset", [this](const httplib::Request&, httplib::Response& res) {
            reset_stats();
            res.status = 204;
        });
        http_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.status = 200;
        });
    }

    static std::string format_now() { return format_rfc3339(now_timestamp()); }

    MockProfile profile_;
    httplib::Server http_;
    std::thread http_thread_;
    std::unique_ptr<GrpcUnaryServer> grpc_;
    std::string host_ = "127.0.0.1";
    int http_port_ = 0;
    int grpc_port_ = 0;

    std::atomic<std::int64_t> inflight_{0};
    std::atomic<std::int64_t> max_inflight_{0};
    std::atomic<std::int64_t> served_{0};
    std::atomic<std::int64_t> errors_{0};
    std::atomic<std::uint64_t> arrivals_{0};

    std::mutex stop_mu_;
    std::condition_variable stop_cv_;
    bool stopping_ = false;
};

}  // namespace archeval
