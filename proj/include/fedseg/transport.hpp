#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedseg/fedavg.hpp"

namespace fedseg {

// Framed binary protocol carrying FedAvg rounds over a reliable byte stream.
// Frame layout, little-endian:
//   magic "FSEG" | u8 version=1 | u8 msg_type | u32 round | u64 payload_len |
//   payload bytes | u32 CRC-32 over header+payload
// BROADCAST payloads are IVWT weight bytes; UPDATE payloads are a u64 sample
// count followed by IVWT weight bytes (the IVWT section is byte-identical to
// the on-disk format).
enum class MsgType : uint8_t {
    Hello = 1,
    Assign = 2,
    Broadcast = 3,
    Update = 4,
    Done = 5,
    Abort = 6,
};

struct WireMessage {
    MsgType type = MsgType::Hello;
    uint32_t round = 0;
    std::vector<uint8_t> payload;
};

class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

constexpr size_t kFrameHeaderSize = 18;
constexpr uint64_t kMaxPayload = 1ull << 32;

std::vector<uint8_t> encode_frame(const WireMessage& msg);
// Decodes a buffer holding exactly one frame; throws ProtocolError on bad
// magic, version, type, length, or CRC.
WireMessage decode_frame(const std::vector<uint8_t>& bytes);

// Per-client protocol state tracked by the server.
enum class SessionPhase { Joining, Waiting, Training, Closed };

struct SessionState {
    int client_id = -1;
    uint32_t last_round_seen = 0;
    SessionPhase phase = SessionPhase::Joining;

    // UPDATE is only legal while Training, and rounds must strictly increase.
    void note_broadcast(uint32_t round);
    void note_update(uint32_t round); // throws ProtocolError on violations
};

struct WireServerOptions {
    std::string host = "127.0.0.1";
    uint16_t port = 0; // 0 = pick an ephemeral port
    int handshake_timeout_ms = 30000;
    int io_timeout_ms = 15 * 60 * 1000;
};

// Server side of Algorithm-1-over-messages. Listens on construction (so the
// chosen port is known before clients start), then serve() runs the
// handshake, R rounds of BROADCAST -> N x UPDATE -> aggregate, and DONE. Any
// failure sends ABORT to every client and throws.
class WireServer {
public:
    WireServer(const UNetConfig& unet, const FedConfig& cfg, WireServerOptions options = {});
    ~WireServer();
    WireServer(const WireServer&) = delete;
    WireServer& operator=(const WireServer&) = delete;

    uint16_t port() const { return port_; }
    TrainResult serve();

private:
    UNetConfig unet_;
    FedConfig cfg_;
    WireServerOptions opt_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
};

// Client side: HELLO/ASSIGN handshake, then train on every BROADCAST and
// reply with UPDATE until DONE (or ABORT, which throws).
void run_wire_client(const std::string& host, uint16_t port, int client_id,
                     const ClientDataset& data, const UNetConfig& unet, const FedConfig& cfg,
                     int io_timeout_ms = 15 * 60 * 1000);

} // namespace fedseg
