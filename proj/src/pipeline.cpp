#include "fedseg/pipeline.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

namespace fedseg {

void PipelineConfig::validate() const {
    if (binarize_threshold <= 0.0 || binarize_threshold >= 1.0)
        throw std::invalid_argument("pipeline: threshold must be inside (0,1)");
    if (postprocess == PostprocessKind::RadialConsolidate &&
        coordinate_mode != CoordinateMode::Polar)
        throw std::invalid_argument("pipeline: RadialConsolidate is only valid in polar mode");
    if (coordinate_mode == CoordinateMode::Polar) grid.validate();
}

BinaryMask binarize(const Tensor& prob_map, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("binarize: threshold must be inside (0,1)");
    int h = 0, w = 0;
    if (prob_map.rank() == 2) {
        h = prob_map.shape[0];
        w = prob_map.shape[1];
    } else if (prob_map.rank() == 3 && prob_map.shape[0] == 1) {
        h = prob_map.shape[1];
        w = prob_map.shape[2];
    } else {
        throw std::invalid_argument("binarize: prob map must be HxW or 1xHxW");
    }
    BinaryMask m(h, w);
    for (size_t i = 0; i < m.bits.size(); ++i)
        m.bits[i] = static_cast<double>(prob_map.data[i]) > threshold ? 1 : 0;
    return m;
}

BinaryMask postprocess_cartesian(const BinaryMask& mask) {
    const int h = mask.h, w = mask.w;
    if (mask.count() == 0) return mask;

    // label 4-connected components, keep the largest (first in scan order on ties)
    std::vector<int> label(mask.bits.size(), -1);
    std::vector<int64_t> sizes;
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        if (!mask.bits[start] || label[start] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        sizes.push_back(0);
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            ++sizes[id];
            const int y = p / w, x = p % w;
            const int nb[4] = {y > 0 ? p - w : -1, y < h - 1 ? p + w : -1, x > 0 ? p - 1 : -1,
                               x < w - 1 ? p + 1 : -1};
            for (int q : nb)
                if (q >= 0 && mask.bits[q] && label[q] < 0) {
                    label[q] = id;
                    stack.push_back(q);
                }
        }
    }
    int best = 0;
    for (size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] > sizes[best]) best = static_cast<int>(i);

    BinaryMask out(h, w);
    for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = label[i] == best ? 1 : 0;

    // fill enclosed holes: background reachable from the border stays 0
    std::vector<uint8_t> outside(out.bits.size(), 0);
    auto push_bg = [&](int p) {
        if (!out.bits[p] && !outside[p]) {
            outside[p] = 1;
            stack.push_back(p);
        }
    };
    for (int x = 0; x < w; ++x) {
        push_bg(x);
        push_bg((h - 1) * w + x);
    }
    for (int y = 0; y < h; ++y) {
        push_bg(y * w);
        push_bg(y * w + w - 1);
    }
    while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int y = p / w, x = p % w;
        if (y > 0) push_bg(p - w);
        if (y < h - 1) push_bg(p + w);
        if (x > 0) push_bg(p - 1);
        if (x < w - 1) push_bg(p + 1);
    }
    for (size_t i = 0; i < out.bits.size(); ++i)
        if (!out.bits[i] && !outside[i]) out.bits[i] = 1;
    return out;
}

namespace {

std::vector<int> median5_circular(const std::vector<int>& rho) {
    const int n = static_cast<int>(rho.size());
    std::vector<int> out(n);
    for (int i = 0; i < n; ++i) {
        int win[5];
        for (int k = -2; k <= 2; ++k) win[k + 2] = rho[((i + k) % n + n) % n];
        std::sort(win, win + 5);
        out[i] = win[2];
    }
    return out;
}

// Applies the circular median until the profile stops changing. When the
// iteration enters a cycle instead of a fixed point, the lexicographically
// smallest profile in the cycle is chosen; re-running from that profile finds
// the same cycle and the same representative, which makes the post-processor
// idempotent.
std::vector<int> smooth_profile(std::vector<int> rho) {
    std::map<std::vector<int>, size_t> seen;
    std::vector<std::vector<int>> history;
    while (true) {
        auto it = seen.find(rho);
        if (it != seen.end()) {
            std::vector<int> best = rho;
            for (size_t i = it->second; i < history.size(); ++i)
                if (history[i] < best) best = history[i];
            return best;
        }
        seen.emplace(rho, history.size());
        history.push_back(rho);
        rho = median5_circular(rho);
    }
}

} // namespace

BinaryMask postprocess_polar(const BinaryMask& polar_mask, PolarRegion region) {
    const int rows = polar_mask.h, cols = polar_mask.w;
    std::vector<int> rho(cols, 0); // filled length per column

    for (int c = 0; c < cols; ++c) {
        if (region == PolarRegion::Eem) {
            // EEM is the outer boundary: fill out to the outermost detection
            for (int r = rows - 1; r >= 0; --r)
                if (polar_mask.at(r, c)) {
                    rho[c] = r + 1;
                    break;
                }
        } else {
            // lumen is a solid region from the center: take the longest run
            int best_len = 0, best_end = -1;
            int run_start = -1;
            for (int r = 0; r <= rows; ++r) {
                const bool set = r < rows && polar_mask.at(r, c);
                if (set && run_start < 0) run_start = r;
                if (!set && run_start >= 0) {
                    const int len = r - run_start;
                    if (len > best_len) {
                        best_len = len;
                        best_end = r - 1;
                    }
                    run_start = -1;
                }
            }
            rho[c] = best_len > 0 ? best_end + 1 : 0;
        }
    }

    rho = smooth_profile(std::move(rho));

    BinaryMask out(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rho[c]; ++r) out.at(r, c) = 1;
    return out;
}

SegResult segment_frame(const Tensor& frame, const UNetModel& eem_model,
                        const UNetModel& lumen_model, const PipelineConfig& config) {
    config.validate();
    if (frame.rank() != 3 || frame.shape[0] != 1)
        throw std::invalid_argument("segment_frame: frame must be 1xHxW");
    const int h = frame.shape[1], w = frame.shape[2];

    Tensor model_in = frame;
    if (config.coordinate_mode == CoordinateMode::Polar) {
        model_in = to_polar(frame, config.grid);
        if (eem_model.config.in_h != config.grid.rows() ||
            eem_model.config.in_w != config.grid.cols())
            throw std::invalid_argument(
                "segment_frame: model input shape disagrees with the polar grid");
    }
    if (eem_model.config.in_h != model_in.shape[1] || eem_model.config.in_w != model_in.shape[2] ||
        lumen_model.config.in_h != model_in.shape[1] ||
        lumen_model.config.in_w != model_in.shape[2])
        throw std::invalid_argument("segment_frame: model/frame shape mismatch");

    // stage 1: the two models are independent
    Tensor batch({1, 1, model_in.shape[1], model_in.shape[2]});
    batch.data = model_in.data;
    auto [eem_probs, c1] = unet_forward(eem_model.config, eem_model.params, batch);
    auto [lumen_probs, c2] = unet_forward(lumen_model.config, lumen_model.params, batch);

    SegResult res;
    res.eem_prob = Tensor({1, model_in.shape[1], model_in.shape[2]});
    res.eem_prob.data = eem_probs.data;
    res.lumen_prob = Tensor({1, model_in.shape[1], model_in.shape[2]});
    res.lumen_prob.data = lumen_probs.data;

    // stage 2: binarize, post-process, return to Cartesian, subtract
    BinaryMask eem = binarize(res.eem_prob, config.binarize_threshold);
    BinaryMask lumen = binarize(res.lumen_prob, config.binarize_threshold);

    if (config.coordinate_mode == CoordinateMode::Polar) {
        if (config.postprocess == PostprocessKind::RadialConsolidate) {
            eem = postprocess_polar(eem, PolarRegion::Eem);
            lumen = postprocess_polar(lumen, PolarRegion::Lumen);
        } else if (config.postprocess == PostprocessKind::LargestComponentFill) {
            eem = postprocess_cartesian(eem);
            lumen = postprocess_cartesian(lumen);
        }
        eem = from_polar(eem, config.grid, h, w);
        lumen = from_polar(lumen, config.grid, h, w);
    } else if (config.postprocess == PostprocessKind::LargestComponentFill) {
        eem = postprocess_cartesian(eem);
        lumen = postprocess_cartesian(lumen);
    }

    res.lumen_mask = mask_and(lumen, eem); // clip lumen to EEM
    res.plaque_mask = mask_minus(eem, res.lumen_mask);
    res.eem_mask = std::move(eem);
    return res;
}

SegMeasurements measure(const SegResult& result, double pixel_spacing_mm) {
    SegMeasurements m;
    m.eem_px = result.eem_mask.count();
    m.lumen_px = result.lumen_mask.count();
    m.plaque_px = result.plaque_mask.count();
    const double a = pixel_spacing_mm * pixel_spacing_mm;
    m.eem_mm2 = static_cast<double>(m.eem_px) * a;
    m.lumen_mm2 = static_cast<double>(m.lumen_px) * a;
    m.plaque_mm2 = static_cast<double>(m.plaque_px) * a;
    m.burden_index = m.eem_px == 0 ? 0.0
                                   : static_cast<double>(m.eem_px - m.lumen_px) /
                                         static_cast<double>(m.eem_px);
    return m;
}

double case_volume(const std::vector<double>& per_frame_areas_mm2, double frame_spacing_mm) {
    if (per_frame_areas_mm2.empty())
        throw std::invalid_argument("case_volume: need at least one frame area");
    double v = 0.0;
    for (double a : per_frame_areas_mm2) v += a * frame_spacing_mm;
    return v;
}

} // namespace fedseg
