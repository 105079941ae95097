#pragma once

#include <string>

#include "fedseg/mask.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

// Binary PGM (P5, maxval 255). Image tensors hold values in [0,1] and are
// quantized to 8 bits on write; masks use {0, 255}.
void pgm_save(const Tensor& image, const std::string& path);
void pgm_save_mask(const BinaryMask& mask, const std::string& path);
Tensor pgm_load(const std::string& path);        // 1xHxW in [0,1]
BinaryMask pgm_load_mask(const std::string& path); // nonzero -> 1

} // namespace fedseg
