#pragma once

// Blocking request client backed by libcurl. One RequestClient owns one
// easy handle and therefore one pooled connection; the load harness keeps
// one client per concurrency slot.

#include <curl/curl.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "archeval/error.hpp"
#include "archeval/metrics.hpp"
#include "archeval/target.hpp"

namespace archeval {

namespace detail {

inline void ensure_curl_initialized() {
    static const bool initialized = [] {
        if (curl_global_init(CURL_GLOBAL_ALL) != CURLE_OK)
            throw Error("curl_global_init failed");
        return true;
    }();
    (void)initialized;
}

struct CurlDeleter {
    void operator()(CURL* h) const noexcept { curl_easy_cleanup(h); }
};
struct SlistDeleter {
    void operator()(curl_slist* l) const noexcept { curl_slist_free_all(l); }
};

using CurlHandle = std::unique_ptr<CURL, CurlDeleter>;
using CurlHeaders = std::unique_ptr<curl_slist, SlistDeleter>;

inline CurlHandle make_curl_handle() {
    ensure_curl_initialized();
    CurlHandle h(curl_easy_init());
    if (!h) throw Error("curl_easy_init failed");
    return h;
}

inline void append_header(CurlHeaders& list, const std::string& line) {
    curl_slist* next = curl_slist_append(list.get(), line.c_str());
    if (!next) throw Error("curl_slist_append failed");
    (void)list.release();
    list.reset(next);
}

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                          s.back() == '\n'))
        s.remove_suffix(1);
    return std::string(s);
}

/// gRPC length-prefixed message: 1 byte compressed flag, 4 byte big-endian length.
inline std::string grpc_frame(std::string_view message) {
    std::string out;
    out.reserve(5 + message.size());
    const auto n = static_cast<std::uint32_t>(message.size());
    out.push_back('\0');
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out.append(message);
    return out;
}

}  // namespace detail

class RequestClient {
public:
    explicit RequestClient(TargetSpec target)
        : target_(std::move(target)), handle_(detail::make_curl_handle()) {
        validate(target_);
        url_ = request_url(target_);
        payload_ = target_.protocol == Protocol::grpc ? detail::grpc_frame(target_.body)
                                                       : target_.body;
        for (const auto& [k, v] : target_.headers) detail::append_header(headers_, k + ": " + v);
        if (target_.protocol == Protocol::grpc) {
            detail::append_header(headers_, "content-type: application/grpc");
            detail::append_header(headers_, "te: trailers");
        } else {
            detail::append_header(headers_, "Expect:");
        }
        configure();
    }

    RequestClient(const RequestClient&) = delete;
    RequestClient& operator=(const RequestClient&) = delete;

    const TargetSpec& target() const noexcept { return target_; }

    /// Issues one request and classifies the outcome. Elapsed time spans
    /// request start to the last response byte on the monotonic clock.
    ResponseSample send() {
        grpc_status_ = -1;
        const auto start = std::chrono::steady_clock::now();
        const CURLcode rc = curl_easy_perform(handle_.get());
        const auto end = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(end - start).count();

        if (rc == CURLE_OPERATION_TIMEDOUT) return ResponseSample::failed(Outcome::timeout);
        if (rc != CURLE_OK) return ResponseSample::failed(Outcome::transport_error);

        long status = 0;
        curl_easy_getinfo(handle_.get(), CURLINFO_RESPONSE_CODE, &status);
        if (target_.protocol == Protocol::grpc) {
            if (status != 200)
                return ResponseSample::failed(Outcome::http_error, static_cast<int>(status));
            if (grpc_status_ != 0)
                return ResponseSample::failed(Outcome::http_error, grpc_status_);
            return ResponseSample::ok(ms, 0);
        }
        if (status >= 400)
            return ResponseSample::failed(Outcome::http_error, static_cast<int>(status));
        return ResponseSample::ok(ms, static_cast<int>(status));
    }

private:
    static size_t discard_body(char*, size_t size, size_t nmemb, void*) { return size * nmemb; }

    static size_t on_header(char* data, size_t size, size_t nmemb, void* self) {
        const size_t n = size * nmemb;
        std::string_view line(data, n);
        constexpr std::string_view key = "grpc-status:";
        if (line.size() >= key.size()) {
            std::string lower(line.substr(0, key.size()));
            for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (lower == key) {
                try {
                    static_cast<RequestClient*>(self)->grpc_status_ =
                        std::stoi(detail::trim(line.substr(key.size())));
                } catch (...) {
                    static_cast<RequestClient*>(self)->grpc_status_ = 2;  // UNKNOWN
                }
            }
        }
        return n;
    }

    void configure() {
        CURL* h = handle_.get();
        const auto timeout_ms = static_cast<long>(std::max(1.0, target_.timeout_s * 1000.0));
        curl_easy_setopt(h, CURLOPT_URL, url_.c_str());
        curl_easy_setopt(h, CURLOPT_NOSIGNAL, 1L);
        curl_easy_setopt(h, CURLOPT_TIMEOUT_MS, timeout_ms);
        curl_easy_setopt(h, CURLOPT_CONNECTTIMEOUT_MS, timeout_ms);
        curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, &RequestClient::discard_body);
        curl_easy_setopt(h, CURLOPT_HEADERFUNCTION, &RequestClient::on_header);
        curl_easy_setopt(h, CURLOPT_HEADERDATA, this);
        curl_easy_setopt(h, CURLOPT_HTTPHEADER, headers_.get());
        curl_easy_setopt(h, CURLOPT_TCP_NODELAY, 1L);

        if (target_.protocol == Protocol::grpc) {
            curl_easy_setopt(h, CURLOPT_HTTP_VERSION,
                             target_.tls ? CURL_HTTP_VERSION_2TLS
                                         : CURL_HTTP_VERSION_2_PRIOR_KNOWLEDGE);
            curl_easy_setopt(h, CURLOPT_POST, 1L);
            curl_easy_setopt(h, CURLOPT_POSTFIELDS, payload_.data());
            curl_easy_setopt(h, CURLOPT_POSTFIELDSIZE_LARGE,
                             static_cast<curl_off_t>(payload_.size()));
            return;
        }

        curl_easy_setopt(h, CURLOPT_HTTP_VERSION, CURL_HTTP_VERSION_1_1);
        if (target_.http_method == "GET") {
            curl_easy_setopt(h, CURLOPT_HTTPGET, 1L);
        } else {
            if (target_.http_method != "POST")
                curl_easy_setopt(h, CURLOPT_CUSTOMREQUEST, target_.http_method.c_str());
            curl_easy_setopt(h, CURLOPT_POST, 1L);
            curl_easy_setopt(h, CURLOPT_POSTFIELDS, payload_.data());
            curl_easy_setopt(h, CURLOPT_POSTFIELDSIZE_LARGE,
                             static_cast<curl_off_t>(payload_.size()));
        }
    }

    TargetSpec target_;
    detail::CurlHandle handle_;
    detail::CurlHeaders headers_;
    std::string url_;
    std::string payload_;
    int grpc_status_ = -1;
};

struct HttpResponse {
    long status = 0;
    std::string body;
};

/// Plain GET used by the load probe to talk to agents.
inline HttpResponse http_get(const std::string& url, double timeout_s) {
    auto h = detail::make_curl_handle();
    HttpResponse resp;
    auto append = +[](char* data, size_t size, size_t nmemb, void* out) -> size_t {
        static_cast<std::string*>(out)->append(data, size * nmemb);
        return size * nmemb;
    };
    const auto timeout_ms = static_cast<long>(std::max(1.0, timeout_s * 1000.0));
    curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(h.get(), CURLOPT_NOSIGNAL, 1L);
    curl_easy_setopt(h.get(), CURLOPT_TIMEOUT_MS, timeout_ms);
    curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, append);
    curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &resp.body);
    const CURLcode rc = curl_easy_perform(h.get());
    if (rc != CURLE_OK) throw Error("GET " + url + ": " + curl_easy_strerror(rc));
    curl_easy_getinfo(h.get(), CURLINFO_RESPONSE_CODE, &resp.status);
    return resp;
}

}  // namespace archeval
