#include "fedseg/phantom.hpp"

#include "fedseg/pgm.hpp"
#include "fedseg/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fedseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

double reflect(double v, double lo, double hi) {
    const double span = hi - lo;
    if (span <= 0) return lo;
    while (v < lo || v > hi) {
        if (v < lo) v = lo + (lo - v);
        if (v > hi) v = hi - (v - hi);
    }
    return v;
}

struct BandRange {
    double lo, hi;
};

// target burden ranges sit inside the bands with margin for rasterization
BandRange burden_target_range(BurdenBand band) {
    switch (band) {
        case BurdenBand::Low: return {0.36, 0.46};
        case BurdenBand::Moderate: return {0.53, 0.67};
        case BurdenBand::High: return {0.73, 0.82};
    }
    throw std::logic_error("bad band");
}

double ellipse_value(const VesselGeometry& g, double scale, double ox, double oy, double px,
                     double py) {
    const double dx = px - (g.cx + ox), dy = py - (g.cy + oy);
    const double c = std::cos(g.eem_phi), s = std::sin(g.eem_phi);
    const double u = dx * c + dy * s, v = -dx * s + dy * c;
    const double a = g.eem_a * scale, b = g.eem_b * scale;
    return (u / a) * (u / a) + (v / b) * (v / b);
}

void check_geometry(const VesselGeometry& g, int image_size) {
    // lumen boundary must stay strictly inside the EEM ellipse
    const double lc = std::cos(g.eem_phi), ls = std::sin(g.eem_phi);
    for (int k = 0; k < 72; ++k) {
        const double t = 2.0 * kPi * k / 72.0;
        const double ex = g.lumen_scale * g.eem_a * std::cos(t);
        const double ey = g.lumen_scale * g.eem_b * std::sin(t);
        const double px = g.cx + g.lumen_dx + ex * lc - ey * ls;
        const double py = g.cy + g.lumen_dy + ex * ls + ey * lc;
        if (ellipse_value(g, 1.0, 0.0, 0.0, px, py) >= 0.985)
            throw std::invalid_argument("phantom: lumen ellipse not strictly inside EEM");
    }
    // EEM must fit in the frame
    const double reach = std::max(g.eem_a, g.eem_b);
    if (g.cx - reach < 0.5 || g.cx + reach > image_size - 1.5 || g.cy - reach < 0.5 ||
        g.cy + reach > image_size - 1.5)
        throw std::invalid_argument("phantom: EEM ellipse leaves the image");
}

double burden_from_masks(const BinaryMask& eem, const BinaryMask& lumen) {
    const int64_t e = eem.count();
    if (e == 0) return 0.0;
    const int64_t l = mask_and(eem, lumen).count();
    return static_cast<double>(e - l) / static_cast<double>(e);
}

} // namespace

const char* band_name(BurdenBand b) {
    switch (b) {
        case BurdenBand::Low: return "low";
        case BurdenBand::Moderate: return "moderate";
        case BurdenBand::High: return "high";
    }
    return "?";
}

BurdenBand band_from_name(const std::string& name) {
    if (name == "low") return BurdenBand::Low;
    if (name == "moderate") return BurdenBand::Moderate;
    if (name == "high") return BurdenBand::High;
    throw std::invalid_argument("unknown band: " + name);
}

BurdenBand band_of(double burden_index) {
    if (burden_index < 0.50) return BurdenBand::Low;
    if (burden_index <= 0.70) return BurdenBand::Moderate;
    return BurdenBand::High;
}

double PhantomCase::mean_burden() const {
    double sum = 0.0;
    for (size_t i = 0; i < eem_masks.size(); ++i)
        sum += burden_from_masks(eem_masks[i], lumen_masks[i]);
    return eem_masks.empty() ? 0.0 : sum / static_cast<double>(eem_masks.size());
}

FrameRender gen_frame(uint64_t seed, const VesselGeometry& geom, const NoiseParams& noise,
                      int image_size) {
    check_geometry(geom, image_size);
    const int n = image_size;
    FrameRender out;
    out.eem = BinaryMask(n, n);
    out.lumen = BinaryMask(n, n);
    out.frame = Tensor({1, n, n});

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const bool in_eem = ellipse_value(geom, 1.0, 0.0, 0.0, x, y) <= 1.0;
            const bool in_lumen =
                in_eem &&
                ellipse_value(geom, geom.lumen_scale, geom.lumen_dx, geom.lumen_dy, x, y) <= 1.0;
            out.eem.at(y, x) = in_eem ? 1 : 0;
            out.lumen.at(y, x) = in_lumen ? 1 : 0;
        }

    Rng rng(seed);
    const double half = (n - 1) / 2.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double v = noise.adventitia_level;
            if (out.lumen.at(y, x))
                v = noise.lumen_level;
            else if (out.eem.at(y, x))
                v = noise.plaque_level;

            const double dx = x - half, dy = half - y;
            const double r = std::hypot(dx, dy);
            v *= 1.0 - noise.attenuation * std::min(1.0, r / half);

            if (noise.lateral_dropout) {
                double th = std::atan2(dy, dx) * 180.0 / kPi; // (-180, 180]
                const double dist = std::min(std::abs(th), 180.0 - std::abs(th));
                if (dist < noise.dropout_halfwidth_deg) {
                    const double u = dist / noise.dropout_halfwidth_deg;
                    v *= 1.0 - noise.dropout_strength * 0.5 * (1.0 + std::cos(kPi * u));
                }
            }

            if (noise.speckle_amp > 0.0) {
                const double s = 4.0 * rng.uniform() * rng.uniform(); // Rayleigh-like, mean 1
                v *= (1.0 - noise.speckle_amp) + noise.speckle_amp * s;
            }
            out.frame.data[static_cast<size_t>(y) * n + x] =
                static_cast<float>(std::max(0.0, std::min(1.0, v)));
        }
    return out;
}

PhantomCase gen_case(uint64_t seed, BurdenBand band, int n_frames, const PhantomConfig& config) {
    if (n_frames < 1) throw std::invalid_argument("gen_case: need at least one frame");
    const int img = config.image_size;
    const double jitter = 2.0;

    // vessel size scales with the frame so small desk images stay valid
    const double ax_lo = 0.15 * img, ax_hi = 0.3125 * img;
    const double ax_step = 0.008 * img;

    for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng(derive_seed(seed, 0xCA5E, static_cast<uint64_t>(attempt)));
        BandRange tr = burden_target_range(band);
        // later attempts shrink toward the range center
        const double shrink = attempt * 0.1;
        const double mid = (tr.lo + tr.hi) / 2.0;
        tr.lo += (mid - tr.lo) * shrink;
        tr.hi -= (tr.hi - mid) * shrink;

        VesselGeometry g;
        g.cx = (img - 1) / 2.0 + rng.uniform(-jitter, jitter);
        g.cy = (img - 1) / 2.0 + rng.uniform(-jitter, jitter);
        g.eem_a = rng.uniform(ax_lo, ax_hi);
        g.eem_b = rng.uniform(ax_lo, ax_hi);
        g.eem_phi = rng.uniform(0.0, kPi);
        double target = rng.uniform(tr.lo, tr.hi);

        PhantomCase pc;
        pc.band = band;
        pc.pixel_spacing_mm = config.pixel_spacing_mm;
        pc.frame_spacing_mm = config.frame_spacing_mm;

        for (int f = 0; f < n_frames; ++f) {
            if (f > 0) {
                g.eem_a = reflect(g.eem_a + rng.uniform(-ax_step, ax_step), ax_lo, ax_hi);
                g.eem_b = reflect(g.eem_b + rng.uniform(-ax_step, ax_step), ax_lo, ax_hi);
                g.eem_phi += rng.uniform(-0.05, 0.05);
                g.cx = reflect(g.cx + rng.uniform(-0.4, 0.4), (img - 1) / 2.0 - jitter,
                               (img - 1) / 2.0 + jitter);
                g.cy = reflect(g.cy + rng.uniform(-0.4, 0.4), (img - 1) / 2.0 - jitter,
                               (img - 1) / 2.0 + jitter);
                target = reflect(target + rng.uniform(-0.012, 0.012), tr.lo, tr.hi);
            }
            g.lumen_scale = std::sqrt(1.0 - target);
            const double max_off = 0.2 * (1.0 - g.lumen_scale) * std::min(g.eem_a, g.eem_b);
            g.lumen_dx = reflect(g.lumen_dx + rng.uniform(-0.15, 0.15), -max_off, max_off);
            g.lumen_dy = reflect(g.lumen_dy + rng.uniform(-0.15, 0.15), -max_off, max_off);

            FrameRender fr = gen_frame(derive_seed(seed, 0xF0A3, static_cast<uint64_t>(attempt),
                                                   static_cast<uint64_t>(f)),
                                       g, config.noise, img);
            pc.frames.push_back(std::move(fr.frame));
            pc.plaque_masks.push_back(mask_minus(fr.eem, fr.lumen));
            pc.eem_masks.push_back(std::move(fr.eem));
            pc.lumen_masks.push_back(std::move(fr.lumen));
            pc.geometry.push_back(g);
        }
        if (band_of(pc.mean_burden()) == band) return pc;
    }
    throw std::runtime_error("gen_case: band unreachable with the configured geometry bounds");
}

std::array<double, 3> default_band_mix() {
    // frame proportions 6039 / 16592 / 3411 of 26042
    return {6039.0 / 26042.0, 16592.0 / 26042.0, 3411.0 / 26042.0};
}

std::vector<PhantomCase> gen_cases(uint64_t seed, int n_cases,
                                   const std::array<double, 3>& band_mix,
                                   const PhantomConfig& config) {
    double total = 0.0;
    int nonzero = 0;
    for (double p : band_mix) {
        if (p < 0) throw std::invalid_argument("gen_cases: negative band proportion");
        total += p;
        if (p > 0) ++nonzero;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("gen_cases: band proportions must sum to 1");
    if (n_cases < nonzero)
        throw std::invalid_argument("gen_cases: fewer cases than nonzero bands");

    // largest-remainder rounding
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = n_cases * band_mix[i];
        counts[i] = static_cast<int>(std::floor(exact));
        rem[i] = exact - counts[i];
        assigned += counts[i];
    }
    while (assigned < n_cases) {
        int best = -1;
        for (int i = 0; i < 3; ++i)
            if (best < 0 || rem[i] > rem[best]) best = i;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }

    std::vector<BurdenBand> bands;
    for (int i = 0; i < counts[0]; ++i) bands.push_back(BurdenBand::Low);
    for (int i = 0; i < counts[1]; ++i) bands.push_back(BurdenBand::Moderate);
    for (int i = 0; i < counts[2]; ++i) bands.push_back(BurdenBand::High);

    std::vector<PhantomCase> cases;
    cases.reserve(bands.size());
    for (size_t i = 0; i < bands.size(); ++i) {
        Rng meta(derive_seed(seed, 0x4E0, i));
        const int span = config.max_frames - config.min_frames;
        const int n_frames =
            config.min_frames + (span > 0 ? static_cast<int>(meta.uniform_int(span + 1)) : 0);
        PhantomCase pc = gen_case(derive_seed(seed, 0xCA0, i), bands[i], n_frames, config);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "case_%03zu", i);
        pc.case_id = buf;
        cases.push_back(std::move(pc));
    }
    return cases;
}

DatasetManifest write_dataset(const std::vector<PhantomCase>& cases, const PhantomConfig& config,
                              uint64_t seed, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    DatasetManifest m;
    m.seed = seed;
    m.pixel_spacing_mm = config.pixel_spacing_mm;
    m.frame_spacing_mm = config.frame_spacing_mm;
    m.image_size = config.image_size;
    m.config = config;

    for (const PhantomCase& pc : cases) {
        fs::create_directories(fs::path(out_dir) / pc.case_id);
        ManifestCase mc;
        mc.case_id = pc.case_id;
        mc.band = pc.band;
        mc.frame_count = pc.frame_count();
        for (int f = 0; f < pc.frame_count(); ++f) {
            char idx[16];
            std::snprintf(idx, sizeof(idx), "%03d", f);
            const std::string base = pc.case_id + "/";
            mc.frame_paths.push_back(base + "frame_" + idx + ".pgm");
            mc.eem_paths.push_back(base + "eem_" + idx + ".pgm");
            mc.lumen_paths.push_back(base + "lumen_" + idx + ".pgm");
            mc.plaque_paths.push_back(base + "plaque_" + idx + ".pgm");
            pgm_save(pc.frames[f], out_dir + "/" + mc.frame_paths.back());
            pgm_save_mask(pc.eem_masks[f], out_dir + "/" + mc.eem_paths.back());
            pgm_save_mask(pc.lumen_masks[f], out_dir + "/" + mc.lumen_paths.back());
            pgm_save_mask(pc.plaque_masks[f], out_dir + "/" + mc.plaque_paths.back());
        }
        m.cases.push_back(std::move(mc));
    }

    nlohmann::json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["pixel_spacing_mm"] = m.pixel_spacing_mm;
    j["frame_spacing_mm"] = m.frame_spacing_mm;
    j["image_size"] = m.image_size;
    j["generator"] = {{"min_frames", config.min_frames},
                      {"max_frames", config.max_frames},
                      {"speckle_amp", config.noise.speckle_amp},
                      {"attenuation", config.noise.attenuation},
                      {"lumen_level", config.noise.lumen_level},
                      {"plaque_level", config.noise.plaque_level},
                      {"adventitia_level", config.noise.adventitia_level},
                      {"lateral_dropout", config.noise.lateral_dropout},
                      {"dropout_strength", config.noise.dropout_strength},
                      {"dropout_halfwidth_deg", config.noise.dropout_halfwidth_deg}};
    j["cases"] = nlohmann::json::array();
    for (const ManifestCase& mc : m.cases) {
        j["cases"].push_back({{"case_id", mc.case_id},
                              {"band", band_name(mc.band)},
                              {"frame_count", mc.frame_count},
                              {"frames", mc.frame_paths},
                              {"eem_masks", mc.eem_paths},
                              {"lumen_masks", mc.lumen_paths},
                              {"plaque_masks", mc.plaque_paths}});
    }
    std::ofstream f(out_dir + "/manifest.json", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write manifest.json in " + out_dir);
    f << j.dump(2) << "\n";
    return m;
}

DatasetManifest gen_dataset(uint64_t seed, int n_cases, const std::array<double, 3>& band_mix,
                            const PhantomConfig& config, const std::string& out_dir) {
    return write_dataset(gen_cases(seed, n_cases, band_mix, config), config, seed, out_dir);
}

DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("cannot open " + manifest_path);
    nlohmann::json j;
    f >> j;

    DatasetManifest m;
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.pixel_spacing_mm = j.at("pixel_spacing_mm").get<double>();
    m.frame_spacing_mm = j.at("frame_spacing_mm").get<double>();
    m.image_size = j.at("image_size").get<int>();
    m.config.image_size = m.image_size;
    m.config.pixel_spacing_mm = m.pixel_spacing_mm;
    m.config.frame_spacing_mm = m.frame_spacing_mm;
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        m.config.min_frames = g.value("min_frames", m.config.min_frames);
        m.config.max_frames = g.value("max_frames", m.config.max_frames);
        m.config.noise.speckle_amp = g.value("speckle_amp", m.config.noise.speckle_amp);
        m.config.noise.attenuation = g.value("attenuation", m.config.noise.attenuation);
        m.config.noise.lateral_dropout = g.value("lateral_dropout", false);
    }
    for (const auto& c : j.at("cases")) {
        ManifestCase mc;
        mc.case_id = c.at("case_id").get<std::string>();
        mc.band = band_from_name(c.at("band").get<std::string>());
        mc.frame_count = c.at("frame_count").get<int>();
        mc.frame_paths = c.at("frames").get<std::vector<std::string>>();
        mc.eem_paths = c.at("eem_masks").get<std::vector<std::string>>();
        mc.lumen_paths = c.at("lumen_masks").get<std::vector<std::string>>();
        mc.plaque_paths = c.at("plaque_masks").get<std::vector<std::string>>();
        m.cases.push_back(std::move(mc));
    }
    return m;
}

std::vector<PhantomCase> load_cases(const DatasetManifest& manifest, const std::string& root_dir) {
    std::vector<PhantomCase> cases;
    for (const ManifestCase& mc : manifest.cases) {
        PhantomCase pc;
        pc.case_id = mc.case_id;
        pc.band = mc.band;
        pc.pixel_spacing_mm = manifest.pixel_spacing_mm;
        pc.frame_spacing_mm = manifest.frame_spacing_mm;
        for (int f = 0; f < mc.frame_count; ++f) {
            pc.frames.push_back(pgm_load(root_dir + "/" + mc.frame_paths[f]));
            pc.eem_masks.push_back(pgm_load_mask(root_dir + "/" + mc.eem_paths[f]));
            pc.lumen_masks.push_back(pgm_load_mask(root_dir + "/" + mc.lumen_paths[f]));
            pc.plaque_masks.push_back(pgm_load_mask(root_dir + "/" + mc.plaque_paths[f]));
        }
        cases.push_back(std::move(pc));
    }
    return cases;
}

std::vector<std::vector<int>> partition_clients(const std::vector<BurdenBand>& case_bands,
                                                int n_clients, PartitionMode mode) {
    const int n = static_cast<int>(case_bands.size());
    if (n_clients < 1) throw std::invalid_argument("partition: need at least one client");
    if (n < n_clients) throw std::invalid_argument("partition: fewer cases than clients");

    std::vector<std::vector<int>> out(n_clients);
    if (mode == PartitionMode::Iid) {
        // stratified round-robin with a single cursor carried across bands,
        // so totals stay balanced and each client sees a similar band mix
        int cursor = 0;
        for (BurdenBand band : {BurdenBand::Low, BurdenBand::Moderate, BurdenBand::High})
            for (int i = 0; i < n; ++i)
                if (case_bands[i] == band) out[cursor++ % n_clients].push_back(i);
    } else {
        std::vector<int> order;
        for (BurdenBand band : {BurdenBand::Low, BurdenBand::Moderate, BurdenBand::High})
            for (int i = 0; i < n; ++i)
                if (case_bands[i] == band) order.push_back(i);
        const int base = n / n_clients, extra = n % n_clients;
        int pos = 0;
        for (int c = 0; c < n_clients; ++c) {
            const int take = base + (c < extra ? 1 : 0);
            for (int k = 0; k < take; ++k) out[c].push_back(order[pos++]);
        }
    }
    for (const auto& v : out)
        if (v.empty()) throw std::runtime_error("partition: produced an empty client");
    return out;
}

} // namespace fedseg
