#include <doctest.h>

#include <cmath>

#include "fedseg/loss.hpp"
#include "fedseg/rng.hpp"
#include "fedseg/unet.hpp"
#include "test_support.hpp"

using namespace fedseg;
using testutil::random_mask;
using testutil::rel_close;

TEST_SUITE_BEGIN("unet");

TEST_CASE("same seed builds bit-identical params, biases zero") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 16;
    cfg.seed = 42;
    UNetModel a = build_model(cfg);
    UNetModel b = build_model(cfg);
    CHECK(a.params == b.params);
    for (const auto& [name, t] : a.params.items)
        if (name.ends_with(".bias"))
            for (float v : t.data) CHECK(v == 0.0f);

    cfg.seed = 43;
    UNetModel c = build_model(cfg);
    CHECK_FALSE(a.params == c.params);
}

TEST_CASE("param count matches the closed-form layer arithmetic") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 64;
    cfg.depth = 2;
    cfg.base_channels = 8;
    auto conv = [](int cin, int cout, int k) { return cout * cin * k * k + cout; };
    // enc0: 1->8, 8->8; enc1: 8->16, 16->16; bottleneck: 16->32, 32->32;
    // dec1: 48->16, 16->16; dec0: 24->8, 8->8; out: 8->1 (1x1)
    const int64_t expect = conv(1, 8, 3) + conv(8, 8, 3) + conv(8, 16, 3) + conv(16, 16, 3) +
                           conv(16, 32, 3) + conv(32, 32, 3) + conv(48, 16, 3) + conv(16, 16, 3) +
                           conv(24, 8, 3) + conv(8, 8, 3) + conv(8, 1, 1);
    CHECK(unet_param_count(cfg) == expect);
}

TEST_CASE("config validation rejects indivisible spatial dims") {
    UNetConfig cfg;
    cfg.in_h = 62;
    cfg.in_w = 64;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("forward preserves spatial shape and stays strictly inside (0,1)") {
    UNetConfig cfg;
    cfg.in_h = 32;
    cfg.in_w = 48;
    cfg.seed = 7;
    UNetModel m = build_model(cfg);
    Rng rng(1);
    Tensor batch({2, 1, 32, 48});
    for (float& v : batch.data) v = static_cast<float>(rng.uniform());
    auto [probs, cache] = unet_forward(cfg, m.params, batch);
    CHECK(probs.shape == std::vector<int>{2, 1, 32, 48});
    for (float v : probs.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("all-zero params produce 0.5 everywhere") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 16;
    ModelParams zeros = unet_layout<float>(cfg);
    Tensor batch({1, 1, 16, 16}, 0.3f);
    auto [probs, cache] = unet_forward(cfg, zeros, batch);
    for (float v : probs.data) CHECK(v == 0.5f);
}

TEST_CASE("identical frames in one batch give identical outputs") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 16;
    cfg.seed = 3;
    UNetModel m = build_model(cfg);
    Rng rng(5);
    Tensor frame({1, 1, 16, 16});
    for (float& v : frame.data) v = static_cast<float>(rng.uniform());
    Tensor batch({2, 1, 16, 16});
    std::copy(frame.data.begin(), frame.data.end(), batch.data.begin());
    std::copy(frame.data.begin(), frame.data.end(), batch.data.begin() + frame.data.size());
    auto [probs, cache] = unet_forward(cfg, m.params, batch);
    for (size_t i = 0; i < frame.data.size(); ++i)
        CHECK(probs.data[i] == probs.data[i + frame.data.size()]);
}

TEST_CASE("forward rejects mismatched batch shapes") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 16;
    UNetModel m = build_model(cfg);
    Tensor bad({1, 1, 16, 8});
    CHECK_THROWS_AS(unet_forward(cfg, m.params, bad), std::invalid_argument);
}

TEST_CASE("zero loss gradient backpropagates to zero parameter gradients") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 8;
    cfg.depth = 1;
    cfg.base_channels = 2;
    cfg.seed = 11;
    UNetModel m = build_model(cfg);
    Tensor batch({1, 1, 8, 8}, 0.5f);
    auto [probs, cache] = unet_forward(cfg, m.params, batch);
    Tensor zero_grad({1, 1, 8, 8});
    ModelParams grads = unet_backward(cfg, m.params, cache, zero_grad);
    CHECK(grads.layout_matches(m.params));
    for (const auto& [_, t] : grads.items)
        for (float v : t.data) CHECK(v == 0.0f);
}

TEST_CASE("gradient layout names equal parameter layout names") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 8;
    cfg.depth = 1;
    cfg.base_channels = 2;
    UNetModel m = build_model(cfg);
    Tensor batch({1, 1, 8, 8}, 0.1f);
    auto [probs, cache] = unet_forward(cfg, m.params, batch);
    Tensor og({1, 1, 8, 8}, 1.0f);
    ModelParams grads = unet_backward(cfg, m.params, cache, og);
    REQUIRE(grads.size() == m.params.size());
    for (size_t i = 0; i < grads.size(); ++i) CHECK(grads.name(i) == m.params.name(i));
}

// Whole-model check: analytic gradient of the hybrid loss vs central finite
// differences of the same loss evaluated through a float64 forward pass.
TEST_CASE("full-model hybrid-loss gradient matches finite differences") {
    UNetConfig cfg;
    cfg.in_h = cfg.in_w = 8;
    cfg.depth = 1;
    cfg.base_channels = 2;
    cfg.seed = 2025;
    UNetModel m = build_model(cfg);

    Rng rng(17);
    Tensor batch({1, 1, 8, 8});
    for (float& v : batch.data) v = static_cast<float>(rng.uniform());
    BinaryMask target = random_mask(8, 8, rng, 0.4);

    auto [probs, cache] = unet_forward(cfg, m.params, batch);
    Tensor probs_hw({8, 8}, 0.0f);
    std::copy(probs.data.begin(), probs.data.end(), probs_hw.data.begin());
    LossResult loss = hybrid_loss(probs_hw, target, 0.5);
    Tensor lgrad({1, 1, 8, 8});
    std::copy(loss.grad.data.begin(), loss.grad.data.end(), lgrad.data.begin());
    ModelParams analytic = unet_backward(cfg, m.params, cache, lgrad);

    // float64 oracle: same params cast up, loss evaluated end to end
    const auto params64 = m.params.cast<double>();
    const auto batch64 = batch.cast<double>();
    auto loss_at = [&](const ParamsT<double>& p) {
        auto [pr, ch] = unet_forward(cfg, p, batch64);
        TensorT<double> hw({8, 8});
        std::copy(pr.data.begin(), pr.data.end(), hw.data.begin());
        return hybrid_loss(hw, target, 0.5).value;
    };

    auto fd_at = [&](size_t ti, int64_t off, double h) {
        ParamsT<double> pp = params64;
        pp.tensor(ti).data[off] += h;
        const double lp = loss_at(pp);
        pp.tensor(ti).data[off] -= 2 * h;
        const double lm = loss_at(pp);
        return (lp - lm) / (2 * h);
    };

    Rng pick(99);
    int checked = 0, sampled = 0;
    const int64_t total = analytic.total_values();
    while (checked < 120 && sampled < 500) {
        ++sampled;
        const int64_t flat = static_cast<int64_t>(pick.uniform_int(static_cast<uint64_t>(total)));
        // locate tensor and offset
        int64_t off = flat;
        size_t ti = 0;
        while (off >= analytic.tensor(ti).numel()) {
            off -= analytic.tensor(ti).numel();
            ++ti;
        }
        // two step sizes; when they disagree the perturbation crosses a relu
        // kink and the FD estimate itself is invalid there, so skip the coord
        const double fd1 = fd_at(ti, off, 1e-3);
        const double fd2 = fd_at(ti, off, 2.5e-4);
        if (!rel_close(fd1, fd2, 5e-3, 1e-7)) continue;
        const double got = analytic.tensor(ti).data[off];
        CHECK_MESSAGE(rel_close(got, fd2, 1e-2, 1e-6),
                      "param ", analytic.name(ti), " offset ", off, " analytic ", got, " fd ", fd2);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_SUITE_END();
