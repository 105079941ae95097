#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace fedseg {

namespace detail {
inline const std::array<uint32_t, 256>& crc32_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
            t[i] = c;
        }
        return t;
    }();
    return table;
}
} // namespace detail

// CRC-32 (IEEE 802.3, reflected). Used by the IVWT weight format and the
// wire framing.
inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0) {
    const auto& table = detail::crc32_table();
    uint32_t c = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

} // namespace fedseg
