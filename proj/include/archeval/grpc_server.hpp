#pragma once

// Minimal cleartext HTTP/2 server that answers gRPC unary calls.
//
// Only what a unary exchange needs is implemented: connection preface,
// SETTINGS/PING acknowledgement, flow-control refunds for received DATA,
// and a HEADERS + DATA + trailing HEADERS response per stream. Request
// header blocks are not decoded, so every path reaches the same handler.
// Responses are HPACK-encoded with literal fields only (no Huffman, no
// dynamic table), which every decoder must accept.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "archeval/error.hpp"
#include "archeval/net.hpp"

namespace archeval {

struct GrpcReply {
    int status = 0;  // grpc-status; 0 is OK
    std::string message;
};

/// Called once per completed request stream, on its own thread.
using GrpcHandler = std::function<GrpcReply(std::string_view request_message)>;

namespace h2 {

inline constexpr std::string_view kPreface = "PRI * HTTP/2.0\r\n\r\nSM\r\n\r\n";

enum FrameType : std::uint8_t {
    kData = 0x0,
    kHeaders = 0x1,
    kPriority = 0x2,
    kRstStream = 0x3,
    kSettings = 0x4,
    kPushPromise = 0x5,
    kPing = 0x6,
    kGoaway = 0x7,
    kWindowUpdate = 0x8,
    kContinuation = 0x9,
};

enum Flags : std::uint8_t {
    kEndStream = 0x1,
    kAck = 0x1,
    kEndHeaders = 0x4,
    kPadded = 0x8,
    kPriorityFlag = 0x20,
};

inline constexpr std::size_t kMaxFrame = 16384;

struct FrameHeader {
    std::uint32_t length = 0;
    std::uint8_t type = 0;
    std::uint8_t flags = 0;
    std::uint32_t stream = 0;
};

inline std::string frame(std::uint8_t type, std::uint8_t flags, std::uint32_t stream,
                         std::string_view payload) {
    std::string out;
    out.reserve(9 + payload.size());
    const auto len = static_cast<std::uint32_t>(payload.size());
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out.push_back(static_cast<char>(type));
    out.push_back(static_cast<char>(flags));
    out.push_back(static_cast<char>((stream >> 24) & 0x7f));
    out.push_back(static_cast<char>((stream >> 16) & 0xff));
    out.push_back(static_cast<char>((stream >> 8) & 0xff));
    out.push_back(static_cast<char>(stream & 0xff));
    out.append(payload);
    return out;
}

inline std::string u32(std::uint32_t v) {
    std::string s(4, '\0');
    s[0] = static_cast<char>((v >> 24) & 0xff);
    s[1] = static_cast<char>((v >> 16) & 0xff);
    s[2] = static_cast<char>((v >> 8) & 0xff);
    s[3] = static_cast<char>(v & 0xff);
    return s;
}

/// HPACK integer with an N-bit prefix; `first` carries the pattern bits.
inline void hpack_int(std::string& out, std::uint8_t first, int prefix_bits, std::size_t value) {
    const std::size_t max_prefix = (1u << prefix_bits) - 1;
    if (value < max_prefix) {
        out.push_back(static_cast<char>(first | value));
        return;
    }
    out.push_back(static_cast<char>(first | max_prefix));
    value -= max_prefix;
    while (value >= 128) {
        out.push_back(static_cast<char>((value % 128) + 128));
        value /= 128;
    }
    out.push_back(static_cast<char>(value));
}

inline void hpack_string(std::string& out, std::string_view s) {
    hpack_int(out, 0x00, 7, s.size());
    out.append(s);
}

/// Literal header field without indexing, new name.
inline void hpack_literal(std::string& out, std::string_view name, std::string_view value) {
    out.push_back('\0');
    hpack_string(out, name);
    hpack_string(out, value);
}

inline std::string response_headers() {
    std::string block;
    block.push_back(static_cast<char>(0x88));  // :status 200 (static index 8)
    hpack_int(block, 0x00, 4, 31);             // content-type (static index 31), not indexed
    hpack_string(block, "application/grpc");
    return block;
}

inline std::string response_trailers(const GrpcReply& reply) {
    std::string block;
    hpack_literal(block, "grpc-status", std::to_string(reply.status));
    if (reply.status != 0) hpack_literal(block, "grpc-message", "mock failure");
    return block;
}

inline std::string grpc_message(std::string_view body) {
    if (body.size() < 5) return {};
    const auto* p = reinterpret_cast<const unsigned char*>(body.data());
    const std::uint32_t n = (std::uint32_t{p[1]} << 24) | (std::uint32_t{p[2]} << 16) |
                            (std::uint32_t{p[3]} << 8) | std::uint32_t{p[4]};
    if (body.size() < 5 + std::size_t{n}) return std::string(body.substr(5));
    return std::string(body.substr(5, n));
}

}  // namespace h2

class GrpcUnaryServer {
public:
    explicit GrpcUnaryServer(GrpcHandler handler) : handler_(std::move(handler)) {}
    GrpcUnaryServer(const GrpcUnaryServer&) = delete;
    GrpcUnaryServer& operator=(const GrpcUnaryServer&) = delete;
    ~GrpcUnaryServer() { stop(); }

    /// Binds and starts accepting. Returns the bound port. Throws if the
    /// address is unavailable.
    int start(const BindAddress& bind) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(bind.port));
        const std::string host = bind.host == "localhost" ? "127.0.0.1" : bind.host;
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw InvalidArgument("gRPC bind host must be an IPv4 address: " + bind.host);
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
            ::listen(listen_fd_, 1024) != 0) {
            const std::string why = std::strerror(errno);
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw Error("cannot bind gRPC listener on " + bind.to_string() + ": " + why);
        }
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        running_ = true;
        acceptor_ = std::thread([this] { accept_loop(); });
        return port_;
    }

    int port() const noexcept { return port_; }

    void stop() {
        if (!running_.exchange(false)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (acceptor_.joinable()) acceptor_.join();
        std::list<Connection> conns;
        {
            std::lock_guard lk(conns_mu_);
            conns.swap(conns_);
        }
        for (auto& c : conns) ::shutdown(c.state->fd, SHUT_RDWR);
        for (auto& c : conns)
            if (c.reader.joinable()) c.reader.join();
        std::unique_lock lk(calls_mu_);
        calls_cv_.wait(lk, [this] { return active_calls_ == 0; });
    }

private:
    struct ConnState {
        explicit ConnState(int f) : fd(f) {}
        ~ConnState() { ::close(fd); }
        int fd;
        std::mutex write_mu;
        std::unordered_set<std::uint32_t> reset_streams;
        std::atomic<bool> done{false};

        bool write_all(std::string_view data) {
            std::lock_guard lk(write_mu);
            return write_locked(data);
        }
        bool write_locked(std::string_view data) {
            while (!data.empty()) {
                const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
                if (n < 0 && errno == EINTR) continue;
                if (n <= 0) return false;
                data.remove_prefix(static_cast<std::size_t>(n));
            }
            return true;
        }
        bool read_exact(char* buf, std::size_t n) {
            while (n > 0) {
                const ssize_t r = ::recv(fd, buf, n, 0);
                if (r < 0 && errno == EINTR) continue;
                if (r <= 0) return false;
                buf += r;
                n -= static_cast<std::size_t>(r);
            }
            return true;
        }
    };

    struct Connection {
        std::shared_ptr<ConnState> state;
        std::thread reader;
    };

    void accept_loop() {
        while (running_) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR) continue;
                return;
            }
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            auto state = std::make_shared<ConnState>(fd);
            std::lock_guard lk(conns_mu_);
            reap_locked();
            if (!running_) {
                ::shutdown(fd, SHUT_RDWR);
                return;
            }
            conns_.push_back({state, std::thread([this, state] { serve(state); })});
        }
    }

    void reap_locked() {
        for (auto it = conns_.begin(); it != conns_.end();) {
            if (it->state->done) {
                it->reader.join();
                it = conns_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void serve(const std::shared_ptr<ConnState>& conn) {
        struct DoneGuard {
            ConnState& c;
            ~DoneGuard() { c.done = true; }
        } guard{*conn};

        if (!conn->write_all(h2::frame(h2::kSettings, 0, 0, {}))) return;
        std::string preface(h2::kPreface.size(), '\0');
        if (!conn->read_exact(preface.data(), preface.size()) || preface != h2::kPreface) return;

        std::unordered_map<std::uint32_t, std::string> bodies;
        std::string payload;
        while (true) {
            char hdr[9];
            if (!conn->read_exact(hdr, sizeof(hdr))) return;
            const auto* u = reinterpret_cast<const unsigned char*>(hdr);
            h2::FrameHeader fh;
            fh.length = (std::uint32_t{u[0]} << 16) | (std::uint32_t{u[1]} << 8) | u[2];
            fh.type = u[3];
            fh.flags = u[4];
            fh.stream = ((std::uint32_t{u[5]} & 0x7f) << 24) | (std::uint32_t{u[6]} << 16) |
                        (std::uint32_t{u[7]} << 8) | u[8];
            if (fh.length > (1u << 24)) return;
            payload.assign(fh.length, '\0');
            if (fh.length > 0 && !conn->read_exact(payload.data(), fh.length)) return;

            switch (fh.type) {
                case h2::kSettings:
                    if (!(fh.flags & h2::kAck) &&
                        !conn->write_all(h2::frame(h2::kSettings, h2::kAck, 0, {})))
                        return;
                    break;
                case h2::kPing:
                    if (!(fh.flags & h2::kAck) &&
                        !conn->write_all(h2::frame(h2::kPing, h2::kAck, 0, payload)))
                        return;
                    break;
                case h2::kGoaway:
                    return;
                case h2::kRstStream: {
                    bodies.erase(fh.stream);
                    std::lock_guard lk(conn->write_mu);
                    conn->reset_streams.insert(fh.stream);
                    break;
                }
                case h2::kHeaders:
                    if (!bodies.contains(fh.stream)) bodies[fh.stream];
                    if (fh.flags & h2::kEndStream) dispatch(conn, fh.stream, bodies);
                    break;
                case h2::kData: {
                    std::string_view data = payload;
                    if (fh.flags & h2::kPadded) {
                        if (data.empty()) return;
                        const auto pad = static_cast<unsigned char>(data[0]);
                        if (pad + 1u > data.size()) return;
                        data = data.substr(1, data.size() - 1 - pad);
                    }
                    bodies[fh.stream].append(data);
                    if (fh.length > 0) {
                        std::string refund = h2::frame(h2::kWindowUpdate, 0, 0, h2::u32(fh.length));
                        if (!(fh.flags & h2::kEndStream))
                            refund += h2::frame(h2::kWindowUpdate, 0, fh.stream, h2::u32(fh.length));
                        if (!conn->write_all(refund)) return;
                    }
                    if (fh.flags & h2::kEndStream) dispatch(conn, fh.stream, bodies);
                    break;
                }
                default:
                    break;  // PRIORITY, WINDOW_UPDATE, CONTINUATION, unknown
            }
        }
    }

    void dispatch(const std::shared_ptr<ConnState>& conn, std::uint32_t stream,
                  std::unordered_map<std::uint32_t, std::string>& bodies) {
        std::string body = std::move(bodies[stream]);
        bodies.erase(stream);
        {
            std::lock_guard lk(calls_mu_);
            ++active_calls_;
        }
        std::thread([this, conn, stream, body = std::move(body)] {
            GrpcReply reply;
            try {
                reply = handler_(h2::grpc_message(body));
            } catch (...) {
                reply = {13, {}};  // INTERNAL
            }
            std::string out =
                h2::frame(h2::kHeaders, h2::kEndHeaders, stream, h2::response_headers());
            const std::string framed = [&] {
                std::string m(5, '\0');
                const auto n = static_cast<std::uint32_t>(reply.message.size());
                m[1] = static_cast<char>((n >> 24) & 0xff);
                m[2] = static_cast<char>((n >> 16) & 0xff);
                m[3] = static_cast<char>((n >> 8) & 0xff);
                m[4] = static_cast<char>(n & 0xff);
                return m + reply.message;
            }();
            for (std::size_t off = 0; off < framed.size(); off += h2::kMaxFrame)
                out += h2::frame(h2::kData, 0, stream,
                                 std::string_view(framed).substr(off, h2::kMaxFrame));
            out += h2::frame(h2::kHeaders, h2::kEndHeaders | h2::kEndStream, stream,
                             h2::response_trailers(reply));
            {
                std::lock_guard lk(conn->write_mu);
                if (!conn->reset_streams.erase(stream)) conn->write_locked(out);
            }
            std::lock_guard lk(calls_mu_);
            if (--active_calls_ == 0) calls_cv_.notify_all();
        }).detach();
    }

    GrpcHandler handler_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex conns_mu_;
    std::list<Connection> conns_;
    std::mutex calls_mu_;
    std::condition_variable calls_cv_;
    int active_calls_ = 0;
};

}  // namespace archeval
