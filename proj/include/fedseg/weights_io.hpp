#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedseg/model_params.hpp"

namespace fedseg {

// IVWT weight container. Layout, all little-endian:
//   magic "IVWT" | u32 version=1 | u32 tensor count
//   per tensor: u16 name length | name bytes (UTF-8) | u8 rank |
//               rank x u32 extents | extent-product x f32 values
//   trailing u32 CRC-32 of all preceding bytes
// Round-trips are bit-exact; the same bytes travel over the wire and to disk.
std::vector<uint8_t> ivwt_encode(const ModelParams& params);
ModelParams ivwt_decode(const std::vector<uint8_t>& bytes);

void ivwt_save(const ModelParams& params, const std::string& path);
ModelParams ivwt_load(const std::string& path);

} // namespace fedseg
