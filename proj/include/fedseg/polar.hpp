#pragma once

#include "fedseg/mask.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

// Resampling contract between Cartesian and polar image spaces. Row r of the
// polar image samples radius r (pixels); column c samples angle c*angular_step
// degrees, theta = 0 along +x, counterclockwise, y up (image rows grow down,
// which the sampling formula accounts for).
struct PolarGrid {
    double cx = 0.0;
    double cy = 0.0;
    int max_radius = 0;      // R; also the polar row count
    double angular_step = 0; // degrees

    int rows() const { return max_radius; }
    int cols() const;
    void validate() const; // throws on degenerate grids
};

// Grid centered on the pixel grid of an HxW image.
PolarGrid grid_for_image(int h, int w, int max_radius, double angular_step_deg);

// Desk-scale default: R=32, 3 degree step (32x120), scaling the full 256x720
// grid proportionally.
PolarGrid desk_grid(int h, int w);

// Bilinear image resampling onto (radius, angle); samples outside the image
// read 0.
Tensor to_polar(const Tensor& image, const PolarGrid& grid);

// Nearest-neighbor variant for masks (keeps values binary).
BinaryMask mask_to_polar(const BinaryMask& mask, const PolarGrid& grid);

// Back-projection: every Cartesian pixel within radius R of the center reads
// its nearest polar cell; pixels beyond R stay 0.
BinaryMask from_polar(const BinaryMask& polar_mask, const PolarGrid& grid, int out_h, int out_w);

// dsc(mask restricted to the radius-R disc, from_polar(to_polar(mask))).
double round_trip_dsc(const BinaryMask& mask, const PolarGrid& grid);

} // namespace fedseg
