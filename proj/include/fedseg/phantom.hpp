#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fedseg/mask.hpp"
#include "fedseg/tensor.hpp"

namespace fedseg {

// Plaque-burden risk bands: Low < 0.50, Moderate 0.50..0.70, High > 0.70.
enum class BurdenBand { Low, Moderate, High };

const char* band_name(BurdenBand b);
BurdenBand band_from_name(const std::string& name);
BurdenBand band_of(double burden_index);

// Vessel cross-section as two nested ellipses: the EEM outline and the lumen
// (a scaled, slightly offset copy). Plaque is the annulus between them.
struct VesselGeometry {
    double cx = 0, cy = 0;      // EEM center, pixels
    double eem_a = 12, eem_b = 12, eem_phi = 0;
    double lumen_scale = 0.6;   // burden index ~= 1 - scale^2
    double lumen_dx = 0, lumen_dy = 0;
};

struct NoiseParams {
    double speckle_amp = 0.55;      // multiplicative speckle strength, 0 = off
    double attenuation = 0.25;      // radial intensity falloff toward the edge
    double lumen_level = 0.08;
    double plaque_level = 0.78;
    double adventitia_level = 0.32;
    bool lateral_dropout = false;   // darkened sectors on the left/right sides
    double dropout_strength = 0.85; // 1 = total signal loss at the sector center
    double dropout_halfwidth_deg = 28.0;
};

struct PhantomConfig {
    int image_size = 64;
    double pixel_spacing_mm = 0.02;
    double frame_spacing_mm = 3.0;
    int min_frames = 8;
    int max_frames = 16;
    NoiseParams noise;
};

// One synthetic patient: a frame stack plus ground-truth masks.
struct PhantomCase {
    std::string case_id;
    BurdenBand band = BurdenBand::Moderate;
    std::vector<Tensor> frames;
    std::vector<BinaryMask> eem_masks, lumen_masks, plaque_masks;
    std::vector<VesselGeometry> geometry;
    double pixel_spacing_mm = 0.02;
    double frame_spacing_mm = 3.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    double mean_burden() const;
};

struct ManifestCase {
    std::string case_id;
    BurdenBand band = BurdenBand::Moderate;
    int frame_count = 0;
    std::vector<std::string> frame_paths, eem_paths, lumen_paths, plaque_paths; // relative
};

struct DatasetManifest {
    int version = 1;
    uint64_t seed = 0;
    double pixel_spacing_mm = 0.02;
    double frame_spacing_mm = 3.0;
    int image_size = 64;
    PhantomConfig config;
    std::vector<ManifestCase> cases;
};

struct FrameRender {
    Tensor frame;
    BinaryMask eem;
    BinaryMask lumen;
};

// Renders one frame: dark lumen, bright speckled plaque annulus, mid-gray
// adventitia, multiplicative speckle (product of two uniform draws) and
// radial attenuation. Masks are rasterized from the analytic ellipses.
FrameRender gen_frame(uint64_t seed, const VesselGeometry& geom, const NoiseParams& noise,
                      int image_size);

// One case: ellipse parameters follow a reflected random walk inside
// band-respecting bounds; the per-case mean burden index lands in the band.
PhantomCase gen_case(uint64_t seed, BurdenBand band, int n_frames, const PhantomConfig& config);

// n_cases cases with bands assigned by largest-remainder rounding of the mix
// (Low, Moderate, High proportions). Frame counts vary per case.
std::vector<PhantomCase> gen_cases(uint64_t seed, int n_cases,
                                   const std::array<double, 3>& band_mix,
                                   const PhantomConfig& config);

// Default mix from the reference distribution: 6039/16592/3411 frames of
// 26042 (Low/Moderate/High).
std::array<double, 3> default_band_mix();

// Writes frames and masks as PGM files under out_dir/<case_id>/ and returns
// the manifest (also written as manifest.json).
DatasetManifest write_dataset(const std::vector<PhantomCase>& cases, const PhantomConfig& config,
                              uint64_t seed, const std::string& out_dir);

DatasetManifest gen_dataset(uint64_t seed, int n_cases, const std::array<double, 3>& band_mix,
                            const PhantomConfig& config, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& manifest_path);
std::vector<PhantomCase> load_cases(const DatasetManifest& manifest, const std::string& root_dir);

enum class PartitionMode { Iid, ByBand };

// Disjoint, exhaustive case-level split across clients. Iid stratifies by
// band with a single rotating cursor so per-client band mixes stay within one
// case of the global mix; ByBand hands out contiguous band-sorted chunks.
std::vector<std::vector<int>> partition_clients(const std::vector<BurdenBand>& case_bands,
                                                int n_clients, PartitionMode mode);

} // namespace fedseg
