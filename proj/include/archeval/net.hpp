#pragma once

#include <sys/socket.h>

#include <string>

#include "archeval/error.hpp"

namespace archeval {

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 0;

    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses `host:port` (port 0 asks the OS for a free port).
inline BindAddress parse_bind(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
        throw InvalidArgument("bind address must look like host:port, got '" + s + "'");
    BindAddress b;
    b.host = s.substr(0, colon);
    try {
        std::size_t used = 0;
        b.port = std::stoi(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1) throw InvalidArgument("trailing characters");
    } catch (const std::exception&) {
        throw InvalidArgument("invalid port in bind address '" + s + "'");
    }
    if (b.port < 0 || b.port > 65535) throw InvalidArgument("port out of range in '" + s + "'");
    return b;
}

/// Listener options without SO_REUSEPORT, so a second server on a taken
/// port fails to bind instead of silently sharing it.
inline void exclusive_listen_options(int sock) {
    int one = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
}

}  // namespace archeval
