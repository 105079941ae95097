#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedseg/model_params.hpp"
#include "fedseg/nn_ops.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

// Compact U-Net: `depth` encoder levels of double-conv blocks (two 3x3
// conv+ReLU), 2x2 max pooling, a double-conv bottleneck, nearest-neighbor
// upsampling with skip concatenation on the way back up, and a final 1x1
// conv + sigmoid producing a single-channel probability map.
struct UNetConfig {
    int in_h = 64;
    int in_w = 64;
    int depth = 2;
    int base_channels = 8;
    uint64_t seed = 0;

    void validate() const;
};

struct UNetModel {
    UNetConfig config;
    ModelParams params;
    AdamState adam;
};

// He-style initialization (scale sqrt(2/fan_in)) from a seeded deterministic
// generator; biases zero.
UNetModel build_model(const UNetConfig& config, AdamHyper hyper = {});

// Canonical parameter layout (names + shapes, zero-filled) for a config.
template <typename S>
ParamsT<S> unet_layout(const UNetConfig& config);

int64_t unet_param_count(const UNetConfig& config);

template <typename S>
struct ConvBlockCacheT {
    TensorT<S> in, z1, a1, z2, out;
};

template <typename S>
struct UNetSampleCacheT {
    std::vector<ConvBlockCacheT<S>> enc;
    std::vector<MaxPool2ResultT<S>> pools;
    ConvBlockCacheT<S> bottleneck;
    std::vector<ConvBlockCacheT<S>> dec; // indexed by level
    TensorT<S> probs;                    // 1xHxW
};

template <typename S>
struct UNetCacheT {
    int in_h = 0, in_w = 0;
    std::vector<UNetSampleCacheT<S>> samples;
};
using UNetCache = UNetCacheT<float>;

namespace unet_detail {

inline std::string level_name(const char* prefix, int level) {
    return std::string(prefix) + std::to_string(level);
}

template <typename S>
ConvBlockCacheT<S> block_forward(const TensorT<S>& x, const ParamsT<S>& params,
                                 const std::string& block) {
    ConvBlockCacheT<S> c;
    c.in = x;
    c.z1 = conv2d(x, *params.find(block + ".conv1.weight"), *params.find(block + ".conv1.bias"));
    c.a1 = relu(c.z1);
    c.z2 = conv2d(c.a1, *params.find(block + ".conv2.weight"), *params.find(block + ".conv2.bias"));
    c.out = relu(c.z2);
    return c;
}

// Backpropagates through one double-conv block; adds weight/bias gradients
// into `acc` (flat double buffers in layout order) and returns d input.
template <typename S>
TensorT<S> block_backward(const ConvBlockCacheT<S>& c, const ParamsT<S>& params,
                          const std::string& block, const TensorT<S>& d_out,
                          ParamsT<S>& layout, std::vector<std::vector<double>>& acc) {
    auto add_grads = [&](const std::string& name, const TensorT<S>& g) {
        for (size_t i = 0; i < layout.size(); ++i) {
            if (layout.name(i) == name) {
                auto& a = acc[i];
                for (size_t k = 0; k < g.data.size(); ++k) a[k] += static_cast<double>(g.data[k]);
                return;
            }
        }
        throw std::logic_error("unet backward: unknown parameter " + name);
    };
    TensorT<S> dz2 = relu_grad(c.z2, d_out);
    LayerGradT<S> g2 = conv2d_grad(c.a1, *params.find(block + ".conv2.weight"), dz2);
    add_grads(block + ".conv2.weight", *g2.weight_grad);
    add_grads(block + ".conv2.bias", *g2.bias_grad);
    TensorT<S> dz1 = relu_grad(c.z1, g2.input_grad);
    LayerGradT<S> g1 = conv2d_grad(c.in, *params.find(block + ".conv1.weight"), dz1);
    add_grads(block + ".conv1.weight", *g1.weight_grad);
    add_grads(block + ".conv1.bias", *g1.bias_grad);
    return std::move(g1.input_grad);
}

} // namespace unet_detail

template <typename S>
ParamsT<S> unet_layout(const UNetConfig& config) {
    config.validate();
    const int base = config.base_channels;
    ParamsT<S> p;
    auto add_block = [&](const std::string& name, int cin, int cout) {
        p.add(name + ".conv1.weight", TensorT<S>({cout, cin, 3, 3}));
        p.add(name + ".conv1.bias", TensorT<S>({cout}));
        p.add(name + ".conv2.weight", TensorT<S>({cout, cout, 3, 3}));
        p.add(name + ".conv2.bias", TensorT<S>({cout}));
    };
    for (int l = 0; l < config.depth; ++l) {
        const int cin = l == 0 ? 1 : base << (l - 1);
        add_block(unet_detail::level_name("enc", l), cin, base << l);
    }
    add_block("bottleneck", base << (config.depth - 1), base << config.depth);
    for (int l = config.depth - 1; l >= 0; --l) {
        const int up = base << (l + 1);
        const int skip = base << l;
        add_block(unet_detail::level_name("dec", l), up + skip, base << l);
    }
    p.add("out.weight", TensorT<S>({1, base, 1, 1}));
    p.add("out.bias", TensorT<S>({1}));
    return p;
}

// Forward pass over a batch. Returns probabilities (strictly inside (0,1))
// plus the activation cache the backward pass needs.
template <typename S>
std::pair<TensorT<S>, UNetCacheT<S>> unet_forward(const UNetConfig& config,
                                                  const ParamsT<S>& params,
                                                  const TensorT<S>& batch) {
    if (batch.rank() != 4 || batch.shape[1] != 1 || batch.shape[2] != config.in_h ||
        batch.shape[3] != config.in_w)
        throw std::invalid_argument("unet_forward: batch must be Nx1x" +
                                    std::to_string(config.in_h) + "x" +
                                    std::to_string(config.in_w) + ", got " +
                                    shape_str(batch.shape));
    const int n = batch.shape[0];
    const int h = config.in_h, w = config.in_w;

    TensorT<S> probs({n, 1, h, w});
    UNetCacheT<S> cache;
    cache.in_h = h;
    cache.in_w = w;
    cache.samples.resize(n);

    for (int s = 0; s < n; ++s) {
        UNetSampleCacheT<S>& sc = cache.samples[s];
        TensorT<S> x({1, h, w});
        std::copy(batch.data.begin() + static_cast<size_t>(s) * h * w,
                  batch.data.begin() + static_cast<size_t>(s + 1) * h * w, x.data.begin());

        for (int l = 0; l < config.depth; ++l) {
            sc.enc.push_back(unet_detail::block_forward(x, params, unet_detail::level_name("enc", l)));
            sc.pools.push_back(maxpool2(sc.enc.back().out));
            x = sc.pools.back().output;
        }
        sc.bottleneck = unet_detail::block_forward(x, params, "bottleneck");
        TensorT<S> cur = sc.bottleneck.out;
        sc.dec.resize(config.depth);
        for (int l = config.depth - 1; l >= 0; --l) {
            TensorT<S> up = upsample2(cur);
            TensorT<S> cat = concat_channels(up, sc.enc[l].out);
            sc.dec[l] = unet_detail::block_forward(cat, params, unet_detail::level_name("dec", l));
            cur = sc.dec[l].out;
        }
        TensorT<S> logits = conv2d(cur, *params.find("out.weight"), *params.find("out.bias"));
        sc.probs = sigmoid(logits);
        std::copy(sc.probs.data.begin(), sc.probs.data.end(),
                  probs.data.begin() + static_cast<size_t>(s) * h * w);
    }
    return {std::move(probs), std::move(cache)};
}

// Backward pass: loss_grad is d loss / d probabilities over the whole batch;
// returns per-parameter gradients in the canonical layout (summed over the
// batch, accumulated in double).
template <typename S>
ParamsT<S> unet_backward(const UNetConfig& config, const ParamsT<S>& params,
                         const UNetCacheT<S>& cache, const TensorT<S>& loss_grad) {
    const int n = static_cast<int>(cache.samples.size());
    if (loss_grad.rank() != 4 || loss_grad.shape[0] != n || loss_grad.shape[1] != 1 ||
        loss_grad.shape[2] != cache.in_h || loss_grad.shape[3] != cache.in_w)
        throw std::invalid_argument("unet_backward: loss_grad does not match cached forward");
    if (n == 0 || static_cast<size_t>(cache.samples[0].enc.size()) != static_cast<size_t>(config.depth))
        throw std::invalid_argument("unet_backward: stale cache");

    ParamsT<S> layout = unet_layout<S>(config);
    if (!layout.layout_matches(params))
        throw std::invalid_argument("unet_backward: params do not match config layout");
    std::vector<std::vector<double>> acc(layout.size());
    for (size_t i = 0; i < layout.size(); ++i)
        acc[i].assign(layout.tensor(i).data.size(), 0.0);

    const int h = cache.in_h, w = cache.in_w;
    for (int s = 0; s < n; ++s) {
        const UNetSampleCacheT<S>& sc = cache.samples[s];
        TensorT<S> dprobs({1, h, w});
        std::copy(loss_grad.data.begin() + static_cast<size_t>(s) * h * w,
                  loss_grad.data.begin() + static_cast<size_t>(s + 1) * h * w,
                  dprobs.data.begin());

        TensorT<S> dlogits = sigmoid_grad_from_output(sc.probs, dprobs);
        LayerGradT<S> gout = conv2d_grad(sc.dec[0].out, *params.find("out.weight"), dlogits);
        for (size_t i = 0; i < layout.size(); ++i) {
            if (layout.name(i) == "out.weight")
                for (size_t k = 0; k < gout.weight_grad->data.size(); ++k)
                    acc[i][k] += static_cast<double>(gout.weight_grad->data[k]);
            if (layout.name(i) == "out.bias")
                for (size_t k = 0; k < gout.bias_grad->data.size(); ++k)
                    acc[i][k] += static_cast<double>(gout.bias_grad->data[k]);
        }

        TensorT<S> dcur = std::move(gout.input_grad);
        std::vector<TensorT<S>> dskip(config.depth);
        for (int l = 0; l < config.depth; ++l) {
            TensorT<S> dcat = unet_detail::block_backward(sc.dec[l], params,
                                                          unet_detail::level_name("dec", l), dcur,
                                                          layout, acc);
            auto [dup, ds] = split_grad(dcat, config.base_channels << (l + 1));
            dskip[l] = std::move(ds);
            dcur = upsample2_grad(dup);
        }

        TensorT<S> dx = unet_detail::block_backward(sc.bottleneck, params, "bottleneck", dcur,
                                                    layout, acc);
        for (int l = config.depth - 1; l >= 0; --l) {
            TensorT<S> d_enc_out = maxpool2_grad(sc.pools[l], dx);
            for (size_t k = 0; k < d_enc_out.data.size(); ++k)
                d_enc_out.data[k] += dskip[l].data[k];
            dx = unet_detail::block_backward(sc.enc[l], params, unet_detail::level_name("enc", l),
                                             d_enc_out, layout, acc);
        }
    }

    for (size_t i = 0; i < layout.size(); ++i) {
        auto& t = layout.tensor(i).data;
        for (size_t k = 0; k < t.size(); ++k) t[k] = static_cast<S>(acc[i][k]);
    }
    return layout;
}

} // namespace fedseg
