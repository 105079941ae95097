#pragma once

#include <cmath>
#include <functional>

#include "fedseg/mask.hpp"
#include "fedseg/rng.hpp"
#include "fedseg/tensor.hpp"

namespace testutil {

inline fedseg::Tensor random_tensor(std::vector<int> shape, fedseg::Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
    fedseg::Tensor t(std::move(shape));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

inline fedseg::BinaryMask random_mask(int h, int w, fedseg::Rng& rng, double density = 0.5) {
    fedseg::BinaryMask m(h, w);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

inline double dot(const fedseg::TensorT<double>& a, const fedseg::TensorT<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Central finite difference of the scalarized map x -> sum(f(x) .* cotangent),
// computed in double. The independent oracle for every analytic gradient.
inline double fd_partial(const std::function<fedseg::TensorT<double>(const fedseg::TensorT<double>&)>& f,
                         fedseg::TensorT<double> x, const fedseg::TensorT<double>& cotangent,
                         size_t coord, double h = 1e-3) {
    x.data[coord] += h;
    const double lp = dot(f(x), cotangent);
    x.data[coord] -= 2.0 * h;
    const double lm = dot(f(x), cotangent);
    return (lp - lm) / (2.0 * h);
}

inline bool rel_close(double a, double b, double rtol, double atol) {
    return std::abs(a - b) <= std::max(atol, rtol * std::max(std::abs(a), std::abs(b)));
}

} // namespace testutil
