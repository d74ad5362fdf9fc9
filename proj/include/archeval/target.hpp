#pragma once

#include <string>
#include <utility>
#include <vector>

#include "archeval/error.hpp"

namespace archeval {

enum class Protocol { http, grpc };

inline std::string to_string(Protocol p) { return p == Protocol::http ? "http" : "grpc"; }

inline Protocol protocol_from_string(const std::string& s) {
    if (s == "http" || s == "https" || s == "rest") return Protocol::http;
    if (s == "grpc") return Protocol::grpc;
    throw InvalidArgument("unknown protocol '" + s + "' (expected http or grpc)");
}

/// How to reach and exercise one system under test.
///
/// For HTTP, `endpoint` is a full URL. For gRPC it is `host:port`, and the
/// call goes to `/<grpc_service>/<grpc_method>` with `body` as the serialized
/// request message (unary calls only).
struct TargetSpec {
    Protocol protocol = Protocol::http;
    std::string endpoint;
    std::string http_method = "POST";
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
    std::string body_file;  // provenance of `body`; empty when given inline
    double timeout_s = 5.0;
    bool tls = false;
    std::string grpc_service;
    std::string grpc_method;

    bool operator==(const TargetSpec&) const = default;
};

inline void validate(const TargetSpec& t) {
    if (t.endpoint.empty()) throw InvalidArgument("target endpoint is empty");
    if (!(t.timeout_s > 0)) throw InvalidArgument("target timeout_s must be positive");
    if (t.protocol == Protocol::grpc && (t.grpc_service.empty() || t.grpc_method.empty()))
        throw InvalidArgument("gRPC targets need grpc_service and grpc_method");
}

/// URL the client actually requests.
inline std::string request_url(const TargetSpec& t) {
    if (t.protocol == Protocol::http) {
        if (t.endpoint.find("://") != std::string::npos) return t.endpoint;
        return (t.tls ? "https://" : "http://") + t.endpoint;
    }
    std::string hostport = t.endpoint;
    if (auto p = hostport.find("://"); p != std::string::npos) hostport = hostport.substr(p + 3);
    while (!hostport.empty() && hostport.back() == '/') hostport.pop_back();
    return (t.tls ? "https://" : "http://") + hostport + "/" + t.grpc_service + "/" +
           t.grpc_method;
}

}  // namespace archeval
