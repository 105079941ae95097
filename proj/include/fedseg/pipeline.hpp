#pragma once

#include "fedseg/loss.hpp"
#include "fedseg/mask.hpp"
#include "fedseg/polar.hpp"
#include "fedseg/tensor.hpp"
#include "fedseg/unet.hpp"

namespace fedseg {

enum class CoordinateMode { Cartesian, Polar };
enum class PostprocessKind { None, LargestComponentFill, RadialConsolidate };
enum class PolarRegion { Eem, Lumen };

struct PipelineConfig {
    CoordinateMode coordinate_mode = CoordinateMode::Cartesian;
    double binarize_threshold = 0.5;
    PostprocessKind postprocess = PostprocessKind::LargestComponentFill;
    PolarGrid grid; // required in Polar mode

    void validate() const;
};

// Two-stage inference result; all masks live in Cartesian frame space, raw
// probability maps are kept in the space the models ran in.
struct SegResult {
    BinaryMask eem_mask;
    BinaryMask lumen_mask;
    BinaryMask plaque_mask;
    Tensor eem_prob;
    Tensor lumen_prob;
};

// 1 where prob > threshold (strict).
BinaryMask binarize(const Tensor& prob_map, double threshold);

// Keep the largest 4-connected component, then fill enclosed holes.
BinaryMask postprocess_cartesian(const BinaryMask& mask);

// Per angle column: consolidate to a single run starting at r=0 (lumen: up to
// the longest run's outer edge; EEM: up to the outermost set cell), then
// smooth the boundary radius profile with a circular window-5 median filter
// applied to stability.
BinaryMask postprocess_polar(const BinaryMask& polar_mask, PolarRegion region);

// Stage 1: run the two models independently. Stage 2: binarize, post-process
// per coordinate system, map back to Cartesian when polar, clip lumen to EEM
// and subtract to form the plaque mask.
SegResult segment_frame(const Tensor& frame, const UNetModel& eem_model,
                        const UNetModel& lumen_model, const PipelineConfig& config);

struct SegMeasurements {
    int64_t eem_px = 0, lumen_px = 0, plaque_px = 0;
    double eem_mm2 = 0, lumen_mm2 = 0, plaque_mm2 = 0;
    double burden_index = 0; // (EEM - lumen) / EEM, 0 when EEM is empty
};

SegMeasurements measure(const SegResult& result, double pixel_spacing_mm);

// Rectangular-rule volume: sum of per-frame areas times the frame spacing.
double case_volume(const std::vector<double>& per_frame_areas_mm2, double frame_spacing_mm = 3.0);

} // namespace fedseg
