#include <doctest.h>

#include "fedseg/fedavg.hpp"
#include "fedseg/loss.hpp"
#include "fedseg/phantom.hpp"
#include "fedseg/rng.hpp"
#include "test_support.hpp"

using namespace fedseg;

namespace {

ModelParams single(const std::vector<float>& values) {
    ModelParams p;
    Tensor t({static_cast<int>(values.size())});
    t.data = values;
    p.add("w", std::move(t));
    return p;
}

// tiny in-memory dataset in the training coordinate space
ClientDataset tiny_dataset(uint64_t seed, int frames, int img = 16) {
    PhantomConfig cfg;
    cfg.image_size = img;
    // scale the vessel down for the small frame
    ClientDataset out;
    Rng rng(seed);
    for (int f = 0; f < frames; ++f) {
        VesselGeometry g;
        g.cx = g.cy = (img - 1) / 2.0;
        g.eem_a = rng.uniform(4.0, 6.0);
        g.eem_b = rng.uniform(4.0, 6.0);
        g.eem_phi = rng.uniform(0.0, 3.14);
        g.lumen_scale = 0.6;
        FrameRender fr = gen_frame(derive_seed(seed, f), g, cfg.noise, img);
        out.push_back({std::move(fr.frame), std::move(fr.eem), std::move(fr.lumen)});
    }
    return out;
}

UNetConfig tiny_unet(int img = 16) {
    UNetConfig u;
    u.in_h = u.in_w = img;
    u.depth = 1;
    u.base_channels = 2;
    return u;
}

} // namespace

TEST_SUITE_BEGIN("fedavg");

TEST_CASE("aggregate weighted-mean hand example") {
    std::vector<ModelParams> clients{single({1, 3}), single({5, 7})};
    ModelParams out = aggregate(clients, {1, 3});
    CHECK(out.tensor(0).data == std::vector<float>{4.0f, 6.0f});
}

TEST_CASE("aggregate with equal counts is the arithmetic mean") {
    std::vector<ModelParams> clients{single({1, 2}), single({3, 6}), single({5, 4})};
    ModelParams out = aggregate(clients, {7, 7, 7});
    CHECK(out.tensor(0).data == std::vector<float>{3.0f, 4.0f});
}

TEST_CASE("aggregate of a single client is the identity") {
    ModelParams p = single({0.25f, -1.5f, 3.75f});
    ModelParams out = aggregate({p}, {11});
    CHECK(out.tensor(0).data == p.tensor(0).data);
}

TEST_CASE("aggregate validates layouts and counts") {
    ModelParams a = single({1, 2});
    ModelParams b;
    b.add("v", Tensor({2}));
    CHECK_THROWS_AS(aggregate({a, b}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate({a, a}, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate({}, {}), std::invalid_argument);
}

TEST_CASE("aggregate stays inside the per-coordinate convex hull") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(4));
        std::vector<ModelParams> clients;
        std::vector<int64_t> counts;
        for (int j = 0; j < n; ++j) {
            clients.push_back(single({static_cast<float>(rng.uniform(-10, 10)),
                                      static_cast<float>(rng.uniform(-10, 10)),
                                      static_cast<float>(rng.uniform(-10, 10))}));
            counts.push_back(1 + static_cast<int64_t>(rng.uniform_int(100)));
        }
        ModelParams out = aggregate(clients, counts);
        for (size_t k = 0; k < 3; ++k) {
            float lo = clients[0].tensor(0).data[k], hi = lo;
            for (int j = 1; j < n; ++j) {
                lo = std::min(lo, clients[j].tensor(0).data[k]);
                hi = std::max(hi, clients[j].tensor(0).data[k]);
            }
            CHECK(out.tensor(0).data[k] >= lo);
            CHECK(out.tensor(0).data[k] <= hi);
        }
    }
}

TEST_CASE("weight normalization sums to one") {
    Rng rng(5);
    std::vector<int64_t> counts{13, 57, 101, 7};
    int64_t total = 0;
    for (int64_t c : counts) total += c;
    double sum = 0;
    for (int64_t c : counts) sum += static_cast<double>(c) / static_cast<double>(total);
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("zero learning rate returns the global params bit-exact") {
    ClientDataset data = tiny_dataset(1, 5);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.learning_rate = 0.0;
    cfg.l2_lambda = 0.0;
    cfg.seed = 4;
    GlobalPair global = init_global_pair(u, cfg);
    ClientUpdateResult res = client_update(0, 1, global, data, u, cfg);
    CHECK(res.eem == global.eem);
    CHECK(res.lumen == global.lumen);
    CHECK(res.sample_count == 5);
}

TEST_CASE("one-batch update matches a hand-applied adam step") {
    ClientDataset data = tiny_dataset(2, 3);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.batch_size = 8; // single batch holds all 3 frames
    cfg.rounds = 1;
    cfg.learning_rate = 1e-3;
    cfg.seed = 11;
    GlobalPair global = init_global_pair(u, cfg);

    ClientUpdateResult res = client_update(0, 1, global, data, u, cfg);

    // replay by hand: same shuffle, one forward/backward, one adam step
    std::vector<int> idx{0, 1, 2};
    Rng rng(derive_seed(cfg.seed, 1, 1, 0));
    rng.shuffle(idx);

    ModelParams params = global.eem;
    AdamHyper hyper;
    hyper.learning_rate = cfg.learning_rate;
    hyper.l2_lambda = cfg.l2_lambda;
    AdamState st = make_adam_state(params, hyper);

    Tensor batch({3, 1, 16, 16});
    for (int s = 0; s < 3; ++s)
        std::copy(data[idx[s]].frame.data.begin(), data[idx[s]].frame.data.end(),
                  batch.data.begin() + static_cast<size_t>(s) * 256);
    auto [probs, cache] = unet_forward(u, params, batch);
    Tensor lgrad({3, 1, 16, 16});
    for (int s = 0; s < 3; ++s) {
        Tensor pred({16, 16});
        std::copy(probs.data.begin() + static_cast<size_t>(s) * 256,
                  probs.data.begin() + static_cast<size_t>(s + 1) * 256, pred.data.begin());
        LossResult lr = hybrid_loss(pred, data[idx[s]].eem, cfg.loss_omega);
        for (size_t k = 0; k < 256; ++k)
            lgrad.data[static_cast<size_t>(s) * 256 + k] = lr.grad.data[k] / 3.0f;
    }
    ModelParams grads = unet_backward(u, params, cache, lgrad);
    adam_step(params, grads, st);

    CHECK(res.eem == params);
}

TEST_CASE("client_update is deterministic") {
    ClientDataset data = tiny_dataset(3, 6);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.learning_rate = 1e-3;
    cfg.seed = 21;
    GlobalPair global = init_global_pair(u, cfg);
    ClientUpdateResult a = client_update(0, 2, global, data, u, cfg);
    ClientUpdateResult b = client_update(0, 2, global, data, u, cfg);
    CHECK(a.eem == b.eem);
    CHECK(a.lumen == b.lumen);
    CHECK(a.mean_loss == b.mean_loss);

    CHECK_THROWS_AS(client_update(0, 1, global, {}, u, cfg), std::invalid_argument);
}

TEST_CASE("server_run with N=1 equals centralized_run per round, bit-exact") {
    ClientDataset data = tiny_dataset(4, 6);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.rounds = 3;
    cfg.learning_rate = 1e-3;
    cfg.seed = 31;

    std::vector<GlobalPair> fed_history, cen_history;
    EvalCallback record_fed = [&](const GlobalPair& g) {
        fed_history.push_back(g);
        return std::array<double, 3>{0, 0, 0};
    };
    EvalCallback record_cen = [&](const GlobalPair& g) {
        cen_history.push_back(g);
        return std::array<double, 3>{0, 0, 0};
    };

    TrainResult fed = server_run({data}, u, cfg, record_fed);
    TrainResult cen = centralized_run(data, u, cfg, record_cen);

    REQUIRE(fed_history.size() == 3);
    for (size_t r = 0; r < 3; ++r) {
        CHECK(fed_history[r].eem == cen_history[r].eem);
        CHECK(fed_history[r].lumen == cen_history[r].lumen);
    }
    CHECK(fed.global.eem == cen.global.eem);
    CHECK(fed.global.lumen == cen.global.lumen);
}

TEST_CASE("identical clients keep global equal to every client") {
    ClientDataset data = tiny_dataset(5, 4);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 3;
    cfg.rounds = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 41;

    // same bytes on all three clients; per-client seeds differ, so force the
    // shuffle seeds equal by using one frame (shuffle of 1 is the identity)
    ClientDataset one = tiny_dataset(6, 1);
    TrainResult fed = server_run({one, one, one}, u, cfg);
    ClientUpdateResult direct = client_update(0, 1, init_global_pair(u, cfg), one, u, cfg);
    // after round 1 the aggregate of three identical updates is that update
    // (checked indirectly: run a 1-round server and compare)
    FedConfig cfg1 = cfg;
    cfg1.rounds = 1;
    TrainResult fed1 = server_run({one, one, one}, u, cfg1);
    CHECK(fed1.global.eem == direct.eem);
    CHECK(fed1.global.lumen == direct.lumen);
    (void)fed;
}

TEST_CASE("rounds=0 returns the seeded initialization unchanged") {
    ClientDataset data = tiny_dataset(7, 2);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.rounds = 0;
    cfg.seed = 51;
    TrainResult res = server_run({data}, u, cfg);
    GlobalPair init = init_global_pair(u, cfg);
    CHECK(res.global.eem == init.eem);
    CHECK(res.global.lumen == init.lumen);
    CHECK(res.rounds.empty());
}

TEST_CASE("parallel and sequential client execution agree bit-exactly") {
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 3;
    cfg.rounds = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 61;
    std::vector<ClientDataset> parts{tiny_dataset(8, 3), tiny_dataset(9, 4), tiny_dataset(10, 5)};
    TrainResult par = server_run(parts, u, cfg, nullptr, true);
    TrainResult seq = server_run(parts, u, cfg, nullptr, false);
    CHECK(par.global.eem == seq.global.eem);
    CHECK(par.global.lumen == seq.global.lumen);
}

TEST_CASE("sgd optimizer switch takes plain gradient steps") {
    ClientDataset data = tiny_dataset(11, 2);
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.n_clients = 1;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-2;
    cfg.l2_lambda = 0.0;
    cfg.optimizer = OptimizerKind::Sgd;
    cfg.seed = 71;
    GlobalPair global = init_global_pair(u, cfg);
    ClientUpdateResult res = client_update(0, 1, global, data, u, cfg);
    // params moved, and a zero-lr run does not move
    CHECK_FALSE(res.eem == global.eem);
    FedConfig frozen = cfg;
    frozen.learning_rate = 0.0;
    ClientUpdateResult still = client_update(0, 1, global, data, u, frozen);
    CHECK(still.eem == global.eem);
}

TEST_CASE("flatten/unflatten round-trips bit-exactly") {
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.seed = 81;
    GlobalPair g = init_global_pair(u, cfg);
    std::vector<float> flat = g.eem.flatten();
    ModelParams rebuilt = g.eem.zeros_like();
    rebuilt.unflatten(flat);
    CHECK(rebuilt == g.eem);
    CHECK(static_cast<int64_t>(flat.size()) == g.eem.total_values());
}

TEST_CASE("combine/split pair preserves both streams") {
    UNetConfig u = tiny_unet();
    FedConfig cfg;
    cfg.seed = 91;
    GlobalPair g = init_global_pair(u, cfg);
    ModelParams combined = combine_pair(g);
    CHECK(combined.size() == g.eem.size() + g.lumen.size());
    GlobalPair back = split_pair(combined);
    CHECK(back.eem == g.eem);
    CHECK(back.lumen == g.lumen);
}

TEST_SUITE_END();
