#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fedseg/loss.hpp"
#include "fedseg/pgm.hpp"
#include "fedseg/phantom.hpp"
#include "fedseg/rng.hpp"

using namespace fedseg;

namespace {

VesselGeometry default_geom() {
    VesselGeometry g;
    g.cx = g.cy = 31.5;
    g.eem_a = 14;
    g.eem_b = 12;
    g.eem_phi = 0.4;
    g.lumen_scale = 0.65;
    return g;
}

} // namespace

TEST_SUITE_BEGIN("phantom");

TEST_CASE("noise-off frame has exactly three intensity plateaus") {
    NoiseParams quiet;
    quiet.speckle_amp = 0.0;
    quiet.attenuation = 0.0;
    FrameRender fr = gen_frame(1, default_geom(), quiet, 64);
    std::set<float> levels(fr.frame.data.begin(), fr.frame.data.end());
    CHECK(levels.size() == 3);
}

TEST_CASE("same seed renders a bit-identical frame") {
    NoiseParams noise;
    FrameRender a = gen_frame(77, default_geom(), noise, 64);
    FrameRender b = gen_frame(77, default_geom(), noise, 64);
    CHECK(a.frame.data == b.frame.data);
    FrameRender c = gen_frame(78, default_geom(), noise, 64);
    CHECK(a.frame.data != c.frame.data);
}

TEST_CASE("generated masks satisfy lumen inside EEM") {
    NoiseParams noise;
    FrameRender fr = gen_frame(5, default_geom(), noise, 64);
    CHECK(fr.eem.count() > 0);
    CHECK(fr.lumen.count() > 0);
    CHECK(mask_minus(fr.lumen, fr.eem).count() == 0); // lumen \ EEM is empty
}

TEST_CASE("containment violations are rejected") {
    VesselGeometry g = default_geom();
    g.lumen_scale = 0.99;
    g.lumen_dx = 3.0;
    CHECK_THROWS_AS(gen_frame(1, g, NoiseParams{}, 64), std::invalid_argument);
}

TEST_CASE("case mean burden lands in its band") {
    PhantomConfig cfg;
    for (BurdenBand band : {BurdenBand::Low, BurdenBand::Moderate, BurdenBand::High}) {
        PhantomCase pc = gen_case(derive_seed(9, static_cast<uint64_t>(band)), band, 10, cfg);
        CHECK(band_of(pc.mean_burden()) == band);
        for (size_t f = 0; f < pc.frames.size(); ++f) {
            CHECK(mask_minus(pc.lumen_masks[f], pc.eem_masks[f]).count() == 0);
            CHECK(mask_and(pc.plaque_masks[f], pc.lumen_masks[f]).count() == 0);
            CHECK(mask_or(pc.plaque_masks[f], pc.lumen_masks[f]) == pc.eem_masks[f]);
        }
    }
}

TEST_CASE("single-frame case volume uses the 3 mm spacing") {
    PhantomConfig cfg;
    PhantomCase pc = gen_case(3, BurdenBand::Moderate, 1, cfg);
    CHECK(pc.frame_count() == 1);
    CHECK(pc.frame_spacing_mm == 3.0);
}

TEST_CASE("consecutive frames stay smooth") {
    PhantomConfig cfg;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        PhantomCase pc = gen_case(derive_seed(400, seed), BurdenBand::Moderate, 6, cfg);
        for (int f = 1; f < pc.frame_count(); ++f)
            CHECK(dsc(pc.eem_masks[f - 1], pc.eem_masks[f]) >= 0.85);
    }
}

TEST_CASE("default band mix gives 10/29/6 for 45 cases") {
    PhantomConfig cfg;
    cfg.min_frames = cfg.max_frames = 2; // keep the test quick
    std::vector<PhantomCase> cases = gen_cases(11, 45, default_band_mix(), cfg);
    int counts[3] = {0, 0, 0};
    for (const auto& c : cases) counts[static_cast<int>(c.band)]++;
    CHECK(counts[0] == 10);
    CHECK(counts[1] == 29);
    CHECK(counts[2] == 6);
}

TEST_CASE("degenerate mixes and counts") {
    PhantomConfig cfg;
    cfg.min_frames = cfg.max_frames = 1;
    std::vector<PhantomCase> cases = gen_cases(1, 4, {1.0, 0.0, 0.0}, cfg);
    for (const auto& c : cases) CHECK(c.band == BurdenBand::Low);
    CHECK_THROWS_AS(gen_cases(1, 2, {0.4, 0.4, 0.2}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(gen_cases(1, 4, {0.5, 0.4, 0.2}, cfg), std::invalid_argument);
}

TEST_CASE("iid partition of 45 cases over 3 clients balances size and bands") {
    PhantomConfig cfg;
    cfg.min_frames = cfg.max_frames = 1;
    std::vector<PhantomCase> cases = gen_cases(21, 45, default_band_mix(), cfg);
    std::vector<BurdenBand> bands;
    for (const auto& c : cases) bands.push_back(c.band);

    auto parts = partition_clients(bands, 3, PartitionMode::Iid);
    REQUIRE(parts.size() == 3);
    std::set<int> seen;
    int band_counts[3][3] = {};
    for (int c = 0; c < 3; ++c) {
        CHECK(parts[c].size() == 15);
        for (int idx : parts[c]) {
            CHECK(seen.insert(idx).second); // pairwise disjoint
            band_counts[c][static_cast<int>(bands[idx])]++;
        }
    }
    CHECK(seen.size() == 45); // exhaustive
    // per-client band mix within one case of the global mix / 3
    const double global[3] = {10.0 / 3.0, 29.0 / 3.0, 6.0 / 3.0};
    for (int c = 0; c < 3; ++c)
        for (int b = 0; b < 3; ++b) CHECK(std::abs(band_counts[c][b] - global[b]) <= 1.0);
}

TEST_CASE("single client gets the whole manifest") {
    std::vector<BurdenBand> bands(7, BurdenBand::Moderate);
    auto parts = partition_clients(bands, 1, PartitionMode::Iid);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].size() == 7);
}

TEST_CASE("by-band partition skews bands across clients") {
    std::vector<BurdenBand> bands;
    for (int i = 0; i < 6; ++i) bands.push_back(BurdenBand::Low);
    for (int i = 0; i < 6; ++i) bands.push_back(BurdenBand::High);
    auto parts = partition_clients(bands, 2, PartitionMode::ByBand);
    for (int idx : parts[0]) CHECK(bands[idx] == BurdenBand::Low);
    for (int idx : parts[1]) CHECK(bands[idx] == BurdenBand::High);
}

TEST_CASE("dataset generation is deterministic including file bytes") {
    namespace fs = std::filesystem;
    const std::string dir1 = (fs::temp_directory_path() / "fedseg_ds1").string();
    const std::string dir2 = (fs::temp_directory_path() / "fedseg_ds2").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    PhantomConfig cfg;
    cfg.min_frames = 2;
    cfg.max_frames = 3;
    gen_dataset(123, 4, default_band_mix(), cfg, dir1);
    gen_dataset(123, 4, default_band_mix(), cfg, dir2);

    int compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir1)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), dir1).string();
        std::ifstream f1(e.path(), std::ios::binary);
        std::ifstream f2(fs::path(dir2) / rel, std::ios::binary);
        REQUIRE(f2.good());
        std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        ++compared;
    }
    CHECK(compared > 8);
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("manifest round-trips through disk") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "fedseg_ds3").string();
    fs::remove_all(dir);
    PhantomConfig cfg;
    cfg.min_frames = 2;
    cfg.max_frames = 2;
    DatasetManifest written = gen_dataset(7, 3, default_band_mix(), cfg, dir);
    DatasetManifest loaded = load_manifest(dir + "/manifest.json");
    REQUIRE(loaded.cases.size() == written.cases.size());
    CHECK(loaded.seed == written.seed);
    for (size_t i = 0; i < loaded.cases.size(); ++i) {
        CHECK(loaded.cases[i].case_id == written.cases[i].case_id);
        CHECK(loaded.cases[i].band == written.cases[i].band);
        CHECK(loaded.cases[i].frame_count == written.cases[i].frame_count);
    }
    std::vector<PhantomCase> cases = load_cases(loaded, dir);
    REQUIRE(cases.size() == 3);
    for (const auto& c : cases) {
        CHECK(c.frame_count() == 2);
        CHECK(c.frames[0].shape == std::vector<int>{1, 64, 64});
        // masks survive the PGM round trip exactly
        CHECK(mask_minus(c.lumen_masks[0], c.eem_masks[0]).count() == 0);
    }
    fs::remove_all(dir);
}

TEST_CASE("pgm image round trip preserves quantized intensities") {
    namespace fs = std::filesystem;
    Rng rng(5);
    Tensor img({1, 16, 16});
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    const std::string path = (fs::temp_directory_path() / "fedseg_t.pgm").string();
    pgm_save(img, path);
    Tensor back = pgm_load(path);
    REQUIRE(back.shape == img.shape);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.0f + 1e-6f);
    fs::remove(path);
}

TEST_SUITE_END();
