#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fedseg/model_params.hpp"
#include "fedseg/tensor.hpp"

// Layer primitives with hand-derived backward passes. All reductions
// accumulate in double regardless of the storage scalar.

namespace fedseg {

template <typename S>
struct LayerGradT {
    TensorT<S> input_grad;
    std::optional<TensorT<S>> weight_grad;
    std::optional<TensorT<S>> bias_grad;
};
using LayerGrad = LayerGradT<float>;

namespace detail {
template <typename S>
void check_conv_shapes(const TensorT<S>& input, const TensorT<S>& weights,
                       const TensorT<S>* bias) {
    if (input.rank() != 3) throw std::invalid_argument("conv2d: input must be CxHxW");
    if (weights.rank() != 4) throw std::invalid_argument("conv2d: weights must be OxCxKxK");
    if (weights.shape[2] != weights.shape[3] || weights.shape[2] % 2 == 0)
        throw std::invalid_argument("conv2d: kernel must be square with odd size");
    if (weights.shape[1] != input.shape[0])
        throw std::invalid_argument("conv2d: weight channels " + std::to_string(weights.shape[1]) +
                                    " do not match input channels " + std::to_string(input.shape[0]));
    if (bias && (bias->rank() != 1 || bias->shape[0] != weights.shape[0]))
        throw std::invalid_argument("conv2d: bias must have one value per output channel");
}
} // namespace detail

// Same-padded, stride-1 convolution. Output spatial size equals input size.
template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& weights, const TensorT<S>& bias) {
    detail::check_conv_shapes(input, weights, &bias);
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    const int O = weights.shape[0], K = weights.shape[2], pad = K / 2;
    TensorT<S> out({O, H, W});
    std::vector<double> acc(static_cast<size_t>(H) * W);
    for (int o = 0; o < O; ++o) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bias.data[o]));
        for (int c = 0; c < C; ++c) {
            const S* in_plane = &input.data[static_cast<size_t>(c) * H * W];
            const S* w_base = &weights.data[(static_cast<size_t>(o) * C + c) * K * K];
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = static_cast<double>(w_base[ky * K + kx]);
                    if (wv == 0.0) continue;
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    for (int y = y0; y < y1; ++y) {
                        const S* src = in_plane + static_cast<size_t>(y + dy) * W;
                        double* a = &acc[static_cast<size_t>(y) * W];
                        for (int x = x0; x < x1; ++x) a[x] += wv * static_cast<double>(src[x + dx]);
                    }
                }
            }
        }
        S* dst = &out.data[static_cast<size_t>(o) * H * W];
        for (size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<S>(acc[i]);
    }
    return out;
}

// Analytic gradients of the same-padded convolution.
template <typename S>
LayerGradT<S> conv2d_grad(const TensorT<S>& input, const TensorT<S>& weights,
                          const TensorT<S>& output_grad) {
    detail::check_conv_shapes<S>(input, weights, nullptr);
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    const int O = weights.shape[0], K = weights.shape[2], pad = K / 2;
    if (output_grad.shape != std::vector<int>{O, H, W})
        throw std::invalid_argument("conv2d_grad: output_grad shape mismatch");

    LayerGradT<S> g;
    g.input_grad = TensorT<S>({C, H, W});
    g.weight_grad = TensorT<S>({O, C, K, K});
    g.bias_grad = TensorT<S>({O});

    std::vector<double> acc(static_cast<size_t>(H) * W);
    for (int c = 0; c < C; ++c) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int o = 0; o < O; ++o) {
            const S* og_plane = &output_grad.data[static_cast<size_t>(o) * H * W];
            const S* w_base = &weights.data[(static_cast<size_t>(o) * C + c) * K * K];
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - pad;
                // input pixel y receives output_grad at y - dy
                const int y0 = std::max(0, dy), y1 = std::min(H, H + dy);
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = static_cast<double>(w_base[ky * K + kx]);
                    if (wv == 0.0) continue;
                    const int dx = kx - pad;
                    const int x0 = std::max(0, dx), x1 = std::min(W, W + dx);
                    for (int y = y0; y < y1; ++y) {
                        const S* src = og_plane + static_cast<size_t>(y - dy) * W;
                        double* a = &acc[static_cast<size_t>(y) * W];
                        for (int x = x0; x < x1; ++x) a[x] += wv * static_cast<double>(src[x - dx]);
                    }
                }
            }
        }
        S* dst = &g.input_grad.data[static_cast<size_t>(c) * H * W];
        for (size_t i = 0; i < acc.size(); ++i) dst[i] = static_cast<S>(acc[i]);
    }

    for (int o = 0; o < O; ++o) {
        const S* og_plane = &output_grad.data[static_cast<size_t>(o) * H * W];
        double bsum = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i)
            bsum += static_cast<double>(og_plane[i]);
        g.bias_grad->data[o] = static_cast<S>(bsum);
        for (int c = 0; c < C; ++c) {
            const S* in_plane = &input.data[static_cast<size_t>(c) * H * W];
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < K; ++kx) {
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    double wsum = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const S* og_row = og_plane + static_cast<size_t>(y) * W;
                        const S* in_row = in_plane + static_cast<size_t>(y + dy) * W;
                        for (int x = x0; x < x1; ++x)
                            wsum += static_cast<double>(og_row[x]) * static_cast<double>(in_row[x + dx]);
                    }
                    g.weight_grad->data[((static_cast<size_t>(o) * C + c) * K + ky) * K + kx] =
                        static_cast<S>(wsum);
                }
            }
        }
    }
    return g;
}

template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
    TensorT<S> out = x;
    for (S& v : out.data) v = v > S(0) ? v : S(0);
    return out;
}

// Gradient passes where x > 0; exactly zero at x = 0.
template <typename S>
TensorT<S> relu_grad(const TensorT<S>& x, const TensorT<S>& output_grad) {
    if (!x.same_shape(output_grad))
        throw std::invalid_argument("relu_grad: shape mismatch");
    TensorT<S> out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] > S(0) ? output_grad.data[i] : S(0);
    return out;
}

// Numerically stable logistic: branch on sign so exp never overflows.
template <typename S>
S sigmoid_scalar(S x) {
    if (x >= S(0)) {
        S e = static_cast<S>(std::exp(-static_cast<double>(x)));
        return S(1) / (S(1) + e);
    }
    S e = static_cast<S>(std::exp(static_cast<double>(x)));
    return e / (S(1) + e);
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
    TensorT<S> out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = sigmoid_scalar(x.data[i]);
    return out;
}

// d sigmoid given the forward output p: grad = og * p * (1 - p).
template <typename S>
TensorT<S> sigmoid_grad_from_output(const TensorT<S>& probs, const TensorT<S>& output_grad) {
    if (!probs.same_shape(output_grad))
        throw std::invalid_argument("sigmoid_grad: shape mismatch");
    TensorT<S> out(probs.shape);
    for (size_t i = 0; i < probs.data.size(); ++i) {
        double p = static_cast<double>(probs.data[i]);
        out.data[i] = static_cast<S>(static_cast<double>(output_grad.data[i]) * p * (1.0 - p));
    }
    return out;
}

template <typename S>
struct MaxPool2ResultT {
    TensorT<S> output;            // Cx(H/2)x(W/2)
    std::vector<int64_t> argmax;  // flat index into the input, one per output value
    std::vector<int> input_shape;
};
using MaxPool2Result = MaxPool2ResultT<float>;

// 2x2 max pool, stride 2. Ties break to the lowest flat index so the
// backward pass is deterministic.
template <typename S>
MaxPool2ResultT<S> maxpool2(const TensorT<S>& input) {
    if (input.rank() != 3) throw std::invalid_argument("maxpool2: input must be CxHxW");
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    if (H % 2 != 0 || W % 2 != 0)
        throw std::invalid_argument("maxpool2: spatial extents must be even, got " +
                                    shape_str(input.shape));
    MaxPool2ResultT<S> r;
    r.output = TensorT<S>({C, H / 2, W / 2});
    r.argmax.resize(r.output.data.size());
    r.input_shape = input.shape;
    size_t oi = 0;
    for (int c = 0; c < C; ++c) {
        const size_t plane = static_cast<size_t>(c) * H * W;
        for (int y = 0; y < H; y += 2) {
            for (int x = 0; x < W; x += 2) {
                int64_t best_idx = static_cast<int64_t>(plane + static_cast<size_t>(y) * W + x);
                S best = input.data[best_idx];
                const int64_t cand[3] = {best_idx + 1, best_idx + W, best_idx + W + 1};
                for (int64_t idx : cand) {
                    if (input.data[idx] > best) {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                r.output.data[oi] = best;
                r.argmax[oi] = best_idx;
                ++oi;
            }
        }
    }
    return r;
}

// Routes each output gradient to the recorded argmax position.
template <typename S>
TensorT<S> maxpool2_grad(const MaxPool2ResultT<S>& pool, const TensorT<S>& output_grad) {
    if (!pool.output.same_shape(output_grad))
        throw std::invalid_argument("maxpool2_grad: output_grad shape mismatch");
    TensorT<S> out(pool.input_shape);
    for (size_t i = 0; i < pool.argmax.size(); ++i)
        out.data[pool.argmax[i]] += output_grad.data[i];
    return out;
}

// Nearest-neighbor 2x upsample.
template <typename S>
TensorT<S> upsample2(const TensorT<S>& input) {
    if (input.rank() != 3) throw std::invalid_argument("upsample2: input must be CxHxW");
    const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
    TensorT<S> out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const S v = input.at(c, y, x);
                out.at(c, 2 * y, 2 * x) = v;
                out.at(c, 2 * y, 2 * x + 1) = v;
                out.at(c, 2 * y + 1, 2 * x) = v;
                out.at(c, 2 * y + 1, 2 * x + 1) = v;
            }
    return out;
}

// Backward of the nearest 2x upsample: sum each 2x2 block.
template <typename S>
TensorT<S> upsample2_grad(const TensorT<S>& output_grad) {
    if (output_grad.rank() != 3) throw std::invalid_argument("upsample2_grad: input must be CxHxW");
    const int C = output_grad.shape[0], H2 = output_grad.shape[1], W2 = output_grad.shape[2];
    if (H2 % 2 != 0 || W2 % 2 != 0)
        throw std::invalid_argument("upsample2_grad: spatial extents must be even");
    TensorT<S> out({C, H2 / 2, W2 / 2});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H2 / 2; ++y)
            for (int x = 0; x < W2 / 2; ++x) {
                double s = static_cast<double>(output_grad.at(c, 2 * y, 2 * x)) +
                           static_cast<double>(output_grad.at(c, 2 * y, 2 * x + 1)) +
                           static_cast<double>(output_grad.at(c, 2 * y + 1, 2 * x)) +
                           static_cast<double>(output_grad.at(c, 2 * y + 1, 2 * x + 1));
                out.at(c, y, x) = static_cast<S>(s);
            }
    return out;
}

// Channel-axis concatenation (U-Net skip connections).
template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.rank() != 3 || b.rank() != 3)
        throw std::invalid_argument("concat_channels: inputs must be CxHxW");
    if (a.shape[1] != b.shape[1] || a.shape[2] != b.shape[2])
        throw std::invalid_argument("concat_channels: spatial dims differ: " +
                                    shape_str(a.shape) + " vs " + shape_str(b.shape));
    TensorT<S> out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

// Splits a gradient at the channel boundary; exact inverse of the concat layout.
template <typename S>
std::pair<TensorT<S>, TensorT<S>> split_grad(const TensorT<S>& output_grad, int split_point) {
    if (output_grad.rank() != 3)
        throw std::invalid_argument("split_grad: input must be CxHxW");
    if (split_point <= 0 || split_point >= output_grad.shape[0])
        throw std::invalid_argument("split_grad: split point out of range");
    const int H = output_grad.shape[1], W = output_grad.shape[2];
    TensorT<S> a({split_point, H, W});
    TensorT<S> b({output_grad.shape[0] - split_point, H, W});
    std::copy(output_grad.data.begin(), output_grad.data.begin() + a.data.size(), a.data.begin());
    std::copy(output_grad.data.begin() + a.data.size(), output_grad.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

struct AdamHyper {
    double learning_rate = 1.00e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2_lambda = 1e-4;
};

struct AdamState {
    ModelParams first_moment;
    ModelParams second_moment;
    int64_t step_count = 0;
    AdamHyper hyper;
};

inline AdamState make_adam_state(const ModelParams& params, AdamHyper hyper = {}) {
    AdamState st;
    st.first_moment = params.zeros_like();
    st.second_moment = params.zeros_like();
    st.step_count = 0;
    st.hyper = hyper;
    return st;
}

// One Adam update with bias correction. The effective gradient is
// grad + l2_lambda * param (L2 regularization folded into the gradient).
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
    if (!params.layout_matches(grads) || !params.layout_matches(state.first_moment))
        throw std::invalid_argument("adam_step: layout mismatch");
    for (const auto& [n, g] : grads.items)
        for (float v : g.data)
            if (!std::isfinite(v)) throw std::invalid_argument("adam_step: non-finite gradient in " + n);

    state.step_count += 1;
    const AdamHyper& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params.tensor(i).data;
        const auto& g = grads.tensor(i).data;
        auto& m = state.first_moment.tensor(i).data;
        auto& v = state.second_moment.tensor(i).data;
        for (size_t k = 0; k < p.size(); ++k) {
            const double geff = static_cast<double>(g[k]) + h.l2_lambda * static_cast<double>(p[k]);
            const double mk = h.beta1 * static_cast<double>(m[k]) + (1.0 - h.beta1) * geff;
            const double vk = h.beta2 * static_cast<double>(v[k]) + (1.0 - h.beta2) * geff * geff;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            p[k] = static_cast<float>(static_cast<double>(p[k]) -
                                      h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon));
        }
    }
}

// Plain SGD update (w <- w - lr * (g + l2 * w)); kept for conformance runs
// against the unmodified averaging loop.
inline void sgd_step(ModelParams& params, const ModelParams& grads, double learning_rate,
                     double l2_lambda) {
    if (!params.layout_matches(grads))
        throw std::invalid_argument("sgd_step: layout mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params.tensor(i).data;
        const auto& g = grads.tensor(i).data;
        for (size_t k = 0; k < p.size(); ++k) {
            const double geff = static_cast<double>(g[k]) + l2_lambda * static_cast<double>(p[k]);
            p[k] = static_cast<float>(static_cast<double>(p[k]) - learning_rate * geff);
        }
    }
}

} // namespace fedseg
