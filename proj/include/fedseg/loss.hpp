#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedseg/mask.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

template <typename S>
struct LossResultT {
    double value = 0.0;
    TensorT<S> grad; // d value / d pred, same shape as pred
};
using LossResult = LossResultT<float>;

// Per-frame / per-case segmentation measurements.
struct MetricsRecord {
    double dsc = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    int64_t area_px = 0;
    double area_mm2 = 0.0;
    double volume_mm3 = 0.0;
    double burden_index = 0.0;
};

struct BlandAltmanResult {
    double mean_diff = 0.0;
    double sd_diff = 0.0;
    double lower_limit = 0.0;
    double upper_limit = 0.0;
    std::vector<std::pair<double, double>> points; // (mean of pair, auto - manual)
    double fraction_within = 0.0;
};

namespace detail {
template <typename S>
void check_pred_target(const TensorT<S>& pred, const BinaryMask& target) {
    const int r = pred.rank();
    const bool ok = (r == 2 && pred.shape[0] == target.h && pred.shape[1] == target.w) ||
                    (r == 3 && pred.shape[0] == 1 && pred.shape[1] == target.h &&
                     pred.shape[2] == target.w);
    if (!ok)
        throw std::invalid_argument("loss: prediction shape " + shape_str(pred.shape) +
                                    " does not match target mask");
}
} // namespace detail

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy over pixels. Predictions are clamped to
// [1e-7, 1 - 1e-7] before the log; the gradient is zero where the clamp is
// active (the clamped function is flat there).
template <typename S>
LossResultT<S> bce_loss(const TensorT<S>& pred, const BinaryMask& target) {
    detail::check_pred_target(pred, target);
    const size_t n = pred.data.size();
    LossResultT<S> r;
    r.grad = TensorT<S>(pred.shape);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double y = target.bits[i];
        const double raw = static_cast<double>(pred.data[i]);
        const double p = std::min(1.0 - kBceClamp, std::max(kBceClamp, raw));
        sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (raw < kBceClamp || raw > 1.0 - kBceClamp)
            r.grad.data[i] = S(0);
        else
            r.grad.data[i] = static_cast<S>((p - y) / (p * (1.0 - p)) / static_cast<double>(n));
    }
    r.value = sum / static_cast<double>(n);
    return r;
}

// Soft Dice loss over probabilities: 1 - (2*sum(p*y) + s) / (sum(p) + sum(y) + s)
// with smoothing s = 1.
template <typename S>
LossResultT<S> dsc_loss(const TensorT<S>& pred, const BinaryMask& target) {
    detail::check_pred_target(pred, target);
    const double s = 1.0;
    const size_t n = pred.data.size();
    double sum_p = 0.0, sum_y = 0.0, sum_py = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(pred.data[i]);
        const double y = target.bits[i];
        sum_p += p;
        sum_y += y;
        sum_py += p * y;
    }
    const double num = 2.0 * sum_py + s;
    const double den = sum_p + sum_y + s;
    LossResultT<S> r;
    r.value = 1.0 - num / den;
    r.grad = TensorT<S>(pred.shape);
    for (size_t i = 0; i < n; ++i) {
        const double y = target.bits[i];
        r.grad.data[i] = static_cast<S>((num - 2.0 * y * den) / (den * den));
    }
    return r;
}

// omega * BCE + (1 - omega) * DSCLoss; the gradient is the same convex
// combination of the component gradients.
template <typename S>
LossResultT<S> hybrid_loss(const TensorT<S>& pred, const BinaryMask& target, double omega = 0.5) {
    if (omega < 0.0 || omega > 1.0)
        throw std::invalid_argument("hybrid_loss: omega must be in [0, 1]");
    LossResultT<S> bce = bce_loss(pred, target);
    LossResultT<S> dsc = dsc_loss(pred, target);
    LossResultT<S> r;
    r.value = omega * bce.value + (1.0 - omega) * dsc.value;
    r.grad = TensorT<S>(pred.shape);
    for (size_t i = 0; i < r.grad.data.size(); ++i)
        r.grad.data[i] = static_cast<S>(omega * static_cast<double>(bce.grad.data[i]) +
                                        (1.0 - omega) * static_cast<double>(dsc.grad.data[i]));
    return r;
}

// Dice similarity coefficient on binary masks: 2|A n B| / (|A| + |B|).
// Defined as 1.0 when both masks are empty.
double dsc(const BinaryMask& a, const BinaryMask& b);

// (recall, precision) = (TP/(TP+FN), TP/(TP+FP)); each 1.0 when its
// denominator is zero.
std::pair<double, double> recall_precision(const BinaryMask& pred, const BinaryMask& truth);

// Agreement statistics; diffs are auto - manual, sd uses the n-1 denominator,
// limits sit at mean +- 1.96 sd.
BlandAltmanResult bland_altman(const std::vector<double>& manual,
                               const std::vector<double>& auto_vals);

} // namespace fedseg
