#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fedseg {

// Binary mask over an HxW frame; 0 = background, 1 = region of interest.
struct BinaryMask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> bits; // row-major, values 0 or 1

    BinaryMask() = default;
    BinaryMask(int height, int width) : h(height), w(width) {
        if (height <= 0 || width <= 0)
            throw std::invalid_argument("mask: extents must be positive");
        bits.assign(static_cast<size_t>(height) * width, 0);
    }

    uint8_t& at(int y, int x) { return bits[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return bits[static_cast<size_t>(y) * w + x]; }

    bool same_shape(const BinaryMask& other) const { return h == other.h && w == other.w; }

    int64_t count() const {
        int64_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }

    bool operator==(const BinaryMask& other) const {
        return h == other.h && w == other.w && bits == other.bits;
    }
};

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask_and: shape mismatch");
    BinaryMask out(a.h, a.w);
    for (size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
    return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask_or: shape mismatch");
    BinaryMask out(a.h, a.w);
    for (size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] | b.bits[i];
    return out;
}

// a AND NOT b (mask subtraction).
inline BinaryMask mask_minus(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask_minus: shape mismatch");
    BinaryMask out(a.h, a.w);
    for (size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] & static_cast<uint8_t>(1 - b.bits[i]);
    return out;
}

} // namespace fedseg
