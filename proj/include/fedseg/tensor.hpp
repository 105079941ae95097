#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedseg {

// Dense row-major tensor, rank 1..4. Image layout is CxHxW, batches NxCxHxW.
// Templated on the scalar so tests can rerun forward passes in double; the
// runtime type is TensorT<float> (see Tensor alias).
template <typename S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> shp, S fill = S(0)) : shape(std::move(shp)) {
        validate_shape();
        data.assign(static_cast<size_t>(numel()), fill);
    }

    TensorT(std::vector<int> shp, std::vector<S> values)
        : shape(std::move(shp)), data(std::move(values)) {
        validate_shape();
        if (data.size() != static_cast<size_t>(numel()))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    int rank() const { return static_cast<int>(shape.size()); }

    int64_t numel() const {
        int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }

    // rank-3 accessors (C,H,W)
    S& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    S at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    template <typename T>
    TensorT<T> cast() const {
        TensorT<T> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (S v : data) out.data.push_back(static_cast<T>(v));
        return out;
    }

private:
    void validate_shape() const {
        if (shape.empty() || shape.size() > 4)
            throw std::invalid_argument("tensor: rank must be 1..4");
        for (int e : shape)
            if (e <= 0) throw std::invalid_argument("tensor: extents must be positive");
    }
};

using Tensor = TensorT<float>;

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

} // namespace fedseg
