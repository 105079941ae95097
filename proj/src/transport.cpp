#include "fedseg/transport.hpp"

#include "fedseg/crc32.hpp"
#include "fedseg/weights_io.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <chrono>
#include <mutex>
#include <thread>

namespace fedseg {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

void check_header(const uint8_t* h) {
    if (h[0] != 'F' || h[1] != 'S' || h[2] != 'E' || h[3] != 'G')
        throw ProtocolError("frame: bad magic");
    if (h[4] != 1) throw ProtocolError("frame: unknown version");
    if (h[5] < 1 || h[5] > 6) throw ProtocolError("frame: unknown message type");
}

void read_exact(int fd, uint8_t* buf, size_t len, int timeout_ms) {
    size_t got = 0;
    while (got < len) {
        pollfd p{fd, POLLIN, 0};
        const int pr = ::poll(&p, 1, timeout_ms);
        if (pr == 0) throw ProtocolError("socket read timeout");
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
        }
        const ssize_t n = ::recv(fd, buf + got, len - got, 0);
        if (n == 0) throw ProtocolError("peer closed the connection");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
        }
        got += static_cast<size_t>(n);
    }
}

void write_all(int fd, const uint8_t* buf, size_t len) {
    size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, buf + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<size_t>(n);
    }
}

void send_message(int fd, const WireMessage& msg) {
    const std::vector<uint8_t> bytes = encode_frame(msg);
    write_all(fd, bytes.data(), bytes.size());
}

WireMessage recv_message(int fd, int timeout_ms) {
    uint8_t header[kFrameHeaderSize];
    read_exact(fd, header, sizeof(header), timeout_ms);
    check_header(header);
    const uint64_t len = get_u64(header + 10);
    if (len > kMaxPayload) throw ProtocolError("frame: payload too large");

    std::vector<uint8_t> rest(static_cast<size_t>(len) + 4);
    read_exact(fd, rest.data(), rest.size(), timeout_ms);

    uint32_t crc = crc32(header, sizeof(header));
    crc = crc32(rest.data(), static_cast<size_t>(len),
                crc); // continue over payload
    const uint32_t stored = get_u32(rest.data() + len);
    if (crc != stored) throw ProtocolError("frame: CRC mismatch");

    WireMessage msg;
    msg.type = static_cast<MsgType>(header[5]);
    msg.round = get_u32(header + 6);
    msg.payload.assign(rest.begin(), rest.begin() + static_cast<long>(len));
    return msg;
}

struct FdGuard {
    int fd = -1;
    ~FdGuard() {
        if (fd >= 0) ::close(fd);
    }
};

} // namespace

std::vector<uint8_t> encode_frame(const WireMessage& msg) {
    if (msg.payload.size() > kMaxPayload) throw ProtocolError("frame: payload too large");
    std::vector<uint8_t> out;
    out.reserve(kFrameHeaderSize + msg.payload.size() + 4);
    out.insert(out.end(), {'F', 'S', 'E', 'G'});
    out.push_back(1); // version
    out.push_back(static_cast<uint8_t>(msg.type));
    put_u32(out, msg.round);
    put_u64(out, msg.payload.size());
    out.insert(out.end(), msg.payload.begin(), msg.payload.end());
    put_u32(out, crc32(out.data(), out.size()));
    return out;
}

WireMessage decode_frame(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < kFrameHeaderSize + 4) throw ProtocolError("frame: truncated");
    check_header(bytes.data());
    const uint64_t len = get_u64(bytes.data() + 10);
    if (len > kMaxPayload) throw ProtocolError("frame: payload too large");
    if (bytes.size() != kFrameHeaderSize + len + 4) throw ProtocolError("frame: length mismatch");
    const uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
    if (crc32(bytes.data(), bytes.size() - 4) != stored) throw ProtocolError("frame: CRC mismatch");

    WireMessage msg;
    msg.type = static_cast<MsgType>(bytes[5]);
    msg.round = get_u32(bytes.data() + 6);
    msg.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.end() - 4);
    return msg;
}

void SessionState::note_broadcast(uint32_t round) {
    if (round <= last_round_seen) throw ProtocolError("session: rounds must strictly increase");
    last_round_seen = round;
    phase = SessionPhase::Training;
}

void SessionState::note_update(uint32_t round) {
    if (phase != SessionPhase::Training)
        throw ProtocolError("session: UPDATE outside the training phase");
    if (round != last_round_seen) throw ProtocolError("session: UPDATE for a stale round");
    phase = SessionPhase::Waiting;
}

WireServer::WireServer(const UNetConfig& unet, const FedConfig& cfg, WireServerOptions options)
    : unet_(unet), cfg_(cfg), opt_(std::move(options)) {
    cfg_.validate();
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ProtocolError("cannot create socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(opt_.port);
    if (::inet_pton(AF_INET, opt_.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw ProtocolError("bad listen address " + opt_.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::listen(listen_fd_, 16) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw ProtocolError(std::string("cannot bind/listen: ") + std::strerror(errno));
    }
    socklen_t alen = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
}

WireServer::~WireServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

TrainResult WireServer::serve() {
    const int n = cfg_.n_clients;
    std::vector<int> client_fd(n, -1);
    std::vector<SessionState> sessions(n);
    std::vector<FdGuard> guards(n);

    auto abort_all = [&](const std::string& why) {
        for (int fd : client_fd) {
            if (fd < 0) continue;
            try {
                send_message(fd, {MsgType::Abort, 0, {}});
            } catch (...) {
                // best effort; the session is going down anyway
            }
        }
        throw ProtocolError(why);
    };

    // handshake: accept until all N clients said HELLO with distinct ids
    int connected = 0;
    while (connected < n) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int pr = ::poll(&p, 1, opt_.handshake_timeout_ms);
        if (pr == 0) abort_all("handshake timeout: " + std::to_string(connected) + "/" +
                               std::to_string(n) + " clients connected");
        if (pr < 0) {
            if (errno == EINTR) continue;
            abort_all("poll failed during handshake");
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        FdGuard pending{fd};
        WireMessage hello;
        try {
            hello = recv_message(fd, opt_.handshake_timeout_ms);
        } catch (const ProtocolError&) {
            continue; // drop the broken connection, keep waiting
        }
        if (hello.type != MsgType::Hello || hello.payload.size() != 4) {
            send_message(fd, {MsgType::Abort, 0, {}});
            continue;
        }
        const uint32_t id = get_u32(hello.payload.data());
        if (id >= static_cast<uint32_t>(n) || client_fd[id] >= 0) {
            send_message(fd, {MsgType::Abort, 0, {}});
            abort_all("duplicate or out-of-range client id " + std::to_string(id));
        }
        client_fd[id] = fd;
        guards[id].fd = fd;
        pending.fd = -1;
        sessions[id].client_id = static_cast<int>(id);
        sessions[id].phase = SessionPhase::Waiting;
        WireMessage assign{MsgType::Assign, 0, {}};
        put_u32(assign.payload, id);
        put_u32(assign.payload, static_cast<uint32_t>(cfg_.rounds));
        send_message(fd, assign);
        ++connected;
    }

    TrainResult result;
    result.global = init_global_pair(unet_, cfg_);

    for (int round = 1; round <= cfg_.rounds; ++round) {
        const std::vector<uint8_t> weights = ivwt_encode(combine_pair(result.global));

        std::vector<ModelParams> eem_list(n), lumen_list(n);
        std::vector<int64_t> counts(n, 0);
        std::vector<std::string> errors(n);
        std::vector<std::thread> workers;
        for (int j = 0; j < n; ++j) {
            workers.emplace_back([&, j] {
                try {
                    sessions[j].note_broadcast(static_cast<uint32_t>(round));
                    send_message(client_fd[j],
                                 {MsgType::Broadcast, static_cast<uint32_t>(round), weights});
                    WireMessage up = recv_message(client_fd[j], opt_.io_timeout_ms);
                    if (up.type != MsgType::Update)
                        throw ProtocolError("expected UPDATE, got type " +
                                            std::to_string(static_cast<int>(up.type)));
                    sessions[j].note_update(up.round);
                    if (up.payload.size() < 8) throw ProtocolError("UPDATE payload too short");
                    counts[j] = static_cast<int64_t>(get_u64(up.payload.data()));
                    if (counts[j] <= 0) throw ProtocolError("UPDATE with non-positive sample count");
                    const std::vector<uint8_t> ivwt(up.payload.begin() + 8, up.payload.end());
                    GlobalPair pair = split_pair(ivwt_decode(ivwt));
                    eem_list[j] = std::move(pair.eem);
                    lumen_list[j] = std::move(pair.lumen);
                } catch (const std::exception& e) {
                    errors[j] = e.what();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (int j = 0; j < n; ++j)
            if (!errors[j].empty())
                abort_all("round " + std::to_string(round) + " failed for client " +
                          std::to_string(j) + ": " + errors[j]);

        result.global.eem = aggregate(eem_list, counts);
        result.global.lumen = aggregate(lumen_list, counts);

        RoundLog log;
        log.round = round;
        log.client_samples = counts;
        result.rounds.push_back(std::move(log));
    }

    for (int j = 0; j < n; ++j) {
        send_message(client_fd[j], {MsgType::Done, static_cast<uint32_t>(cfg_.rounds), {}});
        sessions[j].phase = SessionPhase::Closed;
    }
    return result;
}

void run_wire_client(const std::string& host, uint16_t port, int client_id,
                     const ClientDataset& data, const UNetConfig& unet, const FedConfig& cfg,
                     int io_timeout_ms) {
    if (client_id < 0 || client_id >= cfg.n_clients)
        throw std::invalid_argument("client id out of range");

    FdGuard sock;
    sock.fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (sock.fd < 0) throw ProtocolError("cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw ProtocolError("bad server address " + host);

    // brief retry window so a client started just before the server still joins
    int attempts = 0;
    while (::connect(sock.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        if (++attempts >= 50) throw ProtocolError(std::string("connect failed: ") + std::strerror(errno));
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }

    WireMessage hello{MsgType::Hello, 0, {}};
    put_u32(hello.payload, static_cast<uint32_t>(client_id));
    send_message(sock.fd, hello);

    WireMessage assign = recv_message(sock.fd, io_timeout_ms);
    if (assign.type == MsgType::Abort) throw ProtocolError("server aborted during handshake");
    if (assign.type != MsgType::Assign || assign.payload.size() != 8)
        throw ProtocolError("expected ASSIGN");
    if (get_u32(assign.payload.data()) != static_cast<uint32_t>(client_id))
        throw ProtocolError("ASSIGN echoed the wrong client id");

    while (true) {
        WireMessage msg = recv_message(sock.fd, io_timeout_ms);
        if (msg.type == MsgType::Done) return;
        if (msg.type == MsgType::Abort) throw ProtocolError("server aborted the session");
        if (msg.type != MsgType::Broadcast) throw ProtocolError("unexpected message type");

        GlobalPair global = split_pair(ivwt_decode(msg.payload));
        ClientUpdateResult up =
            client_update(client_id, static_cast<int>(msg.round), global, data, unet, cfg);

        WireMessage reply{MsgType::Update, msg.round, {}};
        put_u64(reply.payload, static_cast<uint64_t>(up.sample_count));
        const std::vector<uint8_t> ivwt = ivwt_encode(combine_pair({up.eem, up.lumen}));
        reply.payload.insert(reply.payload.end(), ivwt.begin(), ivwt.end());
        send_message(sock.fd, reply);
    }
}

} // namespace fedseg
