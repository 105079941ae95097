#include <doctest.h>

#include <thread>

#include "fedseg/phantom.hpp"
#include "fedseg/rng.hpp"
#include "fedseg/transport.hpp"
#include "fedseg/weights_io.hpp"

using namespace fedseg;

namespace {

ClientDataset wire_dataset(uint64_t seed, int frames) {
    PhantomConfig cfg;
    cfg.image_size = 16;
    ClientDataset out;
    Rng rng(seed);
    for (int f = 0; f < frames; ++f) {
        VesselGeometry g;
        g.cx = g.cy = 7.5;
        g.eem_a = rng.uniform(4.0, 6.0);
        g.eem_b = rng.uniform(4.0, 6.0);
        g.lumen_scale = 0.6;
        FrameRender fr = gen_frame(derive_seed(seed, f), g, cfg.noise, 16);
        out.push_back({std::move(fr.frame), std::move(fr.eem), std::move(fr.lumen)});
    }
    return out;
}

UNetConfig wire_unet() {
    UNetConfig u;
    u.in_h = u.in_w = 16;
    u.depth = 1;
    u.base_channels = 2;
    return u;
}

} // namespace

TEST_SUITE_BEGIN("transport");

TEST_CASE("empty-payload DONE frame has the documented byte layout") {
    WireMessage done{MsgType::Done, 7, {}};
    std::vector<uint8_t> bytes = encode_frame(done);
    REQUIRE(bytes.size() == kFrameHeaderSize + 4);
    CHECK(bytes[0] == 'F');
    CHECK(bytes[1] == 'S');
    CHECK(bytes[2] == 'E');
    CHECK(bytes[3] == 'G');
    CHECK(bytes[4] == 1); // version
    CHECK(bytes[5] == 5); // DONE
    CHECK(bytes[6] == 7); // round, little-endian
    CHECK(bytes[7] == 0);
    for (int i = 10; i < 18; ++i) CHECK(bytes[i] == 0); // payload_len 0
    WireMessage back = decode_frame(bytes);
    CHECK(back.type == MsgType::Done);
    CHECK(back.round == 7);
    CHECK(back.payload.empty());
}

TEST_CASE("round trip of a 1 MiB UPDATE payload") {
    Rng rng(1);
    WireMessage msg{MsgType::Update, 3, {}};
    msg.payload.resize(1 << 20);
    for (auto& b : msg.payload) b = static_cast<uint8_t>(rng.next_u64() & 0xFF);
    WireMessage back = decode_frame(encode_frame(msg));
    CHECK(back.type == msg.type);
    CHECK(back.round == msg.round);
    CHECK(back.payload == msg.payload);
}

TEST_CASE("single byte flip anywhere is detected") {
    WireMessage msg{MsgType::Broadcast, 2, {1, 2, 3, 4, 5}};
    const std::vector<uint8_t> bytes = encode_frame(msg);
    Rng rng(2);
    for (size_t i = 0; i < bytes.size(); ++i) {
        std::vector<uint8_t> bad = bytes;
        uint8_t replacement = static_cast<uint8_t>(rng.uniform_int(256));
        if (replacement == bad[i]) replacement ^= 0x5A;
        bad[i] = replacement;
        CHECK_THROWS_AS((void)decode_frame(bad), ProtocolError);
    }
}

TEST_CASE("fuzz: 10000 corrupting mutations are all rejected") {
    Rng rng(3);
    WireMessage base{MsgType::Update, 5, {}};
    base.payload.resize(256);
    for (auto& b : base.payload) b = static_cast<uint8_t>(rng.next_u64() & 0xFF);
    const std::vector<uint8_t> bytes = encode_frame(base);

    int rejected = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        std::vector<uint8_t> bad = bytes;
        const int kind = static_cast<int>(rng.uniform_int(3));
        if (kind == 0) {
            // flip a random byte
            const size_t i = static_cast<size_t>(rng.uniform_int(bad.size()));
            uint8_t r = static_cast<uint8_t>(rng.uniform_int(256));
            if (r == bad[i]) r ^= 0xFF;
            bad[i] = r;
        } else if (kind == 1) {
            // truncate
            const size_t cut = 1 + static_cast<size_t>(rng.uniform_int(bad.size() - 1));
            bad.resize(cut);
        } else {
            // burst of up to 8 random bytes
            const size_t i = static_cast<size_t>(rng.uniform_int(bad.size()));
            const size_t len = std::min(bad.size() - i, 1 + static_cast<size_t>(rng.uniform_int(8)));
            bool changed = false;
            for (size_t k = 0; k < len; ++k) {
                const uint8_t r = static_cast<uint8_t>(rng.uniform_int(256));
                if (r != bad[i + k]) changed = true;
                bad[i + k] = r;
            }
            if (!changed) bad[i] ^= 0x01;
        }
        try {
            (void)decode_frame(bad);
        } catch (const ProtocolError&) {
            ++rejected;
        }
    }
    CHECK(rejected == trials);
}

TEST_CASE("session state machine enforces ordering") {
    SessionState s;
    s.phase = SessionPhase::Waiting;
    s.note_broadcast(1);
    CHECK(s.phase == SessionPhase::Training);
    s.note_update(1);
    CHECK(s.phase == SessionPhase::Waiting);
    // update outside training
    CHECK_THROWS_AS(s.note_update(1), ProtocolError);
    // stale round
    s.note_broadcast(2);
    CHECK_THROWS_AS(s.note_update(1), ProtocolError);
    // rounds must strictly increase
    CHECK_THROWS_AS(s.note_broadcast(2), ProtocolError);
}

TEST_CASE("loopback 3-client run matches the in-process engine bit-exactly") {
    UNetConfig u = wire_unet();
    FedConfig cfg;
    cfg.n_clients = 3;
    cfg.rounds = 4;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 99;

    std::vector<ClientDataset> parts{wire_dataset(1, 5), wire_dataset(2, 6), wire_dataset(3, 4)};
    TrainResult reference = server_run(parts, u, cfg);

    WireServer server(u, cfg);
    const uint16_t port = server.port();
    TrainResult wire;
    std::thread server_thread([&] { wire = server.serve(); });
    std::vector<std::thread> clients;
    for (int j = 0; j < 3; ++j)
        clients.emplace_back([&, j] { run_wire_client("127.0.0.1", port, j, parts[j], u, cfg); });
    for (auto& t : clients) t.join();
    server_thread.join();

    CHECK(wire.global.eem == reference.global.eem);
    CHECK(wire.global.lumen == reference.global.lumen);
    // weights on the wire and on disk share the serializer
    CHECK(ivwt_encode(combine_pair(wire.global)) == ivwt_encode(combine_pair(reference.global)));
}

TEST_CASE("server aborts when no client connects in time") {
    UNetConfig u = wire_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.rounds = 1;
    WireServerOptions opt;
    opt.handshake_timeout_ms = 200;
    WireServer server(u, cfg, opt);
    CHECK_THROWS_AS(server.serve(), ProtocolError);
}

TEST_CASE("duplicate client id aborts the session") {
    UNetConfig u = wire_unet();
    FedConfig cfg;
    cfg.n_clients = 2;
    cfg.rounds = 1;
    cfg.learning_rate = 0.0;
    WireServerOptions opt;
    opt.handshake_timeout_ms = 3000;
    WireServer server(u, cfg, opt);
    const uint16_t port = server.port();

    ClientDataset data = wire_dataset(4, 2);
    std::thread c1([&] {
        try {
            run_wire_client("127.0.0.1", port, 0, data, u, cfg);
        } catch (const ProtocolError&) {
            // expected: the server aborts after the duplicate id arrives
        }
    });
    std::thread c2([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
        try {
            run_wire_client("127.0.0.1", port, 0, data, u, cfg);
        } catch (const ProtocolError&) {
        }
    });
    CHECK_THROWS_AS(server.serve(), ProtocolError);
    c1.join();
    c2.join();
}

TEST_SUITE_END();
