#include "fedseg/polar.hpp"

#include "fedseg/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fedseg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

int PolarGrid::cols() const {
    return static_cast<int>(std::lround(360.0 / angular_step));
}

void PolarGrid::validate() const {
    if (max_radius < 1) throw std::invalid_argument("polar grid: max_radius must be >= 1");
    if (angular_step <= 0.0) throw std::invalid_argument("polar grid: angular step must be positive");
    const double c = 360.0 / angular_step;
    if (std::abs(c - std::round(c)) > 1e-9)
        throw std::invalid_argument("polar grid: 360 must be divisible by the angular step");
}

PolarGrid grid_for_image(int h, int w, int max_radius, double angular_step_deg) {
    PolarGrid g;
    g.cx = (w - 1) / 2.0;
    g.cy = (h - 1) / 2.0;
    g.max_radius = max_radius;
    g.angular_step = angular_step_deg;
    g.validate();
    return g;
}

PolarGrid desk_grid(int h, int w) { return grid_for_image(h, w, 32, 3.0); }

Tensor to_polar(const Tensor& image, const PolarGrid& grid) {
    grid.validate();
    if (image.rank() != 3 || image.shape[0] != 1)
        throw std::invalid_argument("to_polar: image must be 1xHxW");
    const int h = image.shape[1], w = image.shape[2];
    if (grid.cx < 0 || grid.cx > w - 1 || grid.cy < 0 || grid.cy > h - 1)
        throw std::invalid_argument("to_polar: grid center outside image");

    const int rows = grid.rows(), cols = grid.cols();
    std::vector<double> ct(cols), st(cols);
    for (int c = 0; c < cols; ++c) {
        const double th = c * grid.angular_step * kPi / 180.0;
        ct[c] = std::cos(th);
        st[c] = std::sin(th);
    }

    Tensor out({1, rows, cols});
    auto pixel = [&](int y, int x) -> double {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
        return static_cast<double>(image.data[static_cast<size_t>(y) * w + x]);
    };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double x = grid.cx + r * ct[c];
            const double y = grid.cy - r * st[c];
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const double fx = x - x0, fy = y - y0;
            const double v = (1 - fy) * ((1 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1)) +
                             fy * ((1 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1));
            out.data[static_cast<size_t>(r) * cols + c] = static_cast<float>(v);
        }
    }
    return out;
}

BinaryMask mask_to_polar(const BinaryMask& mask, const PolarGrid& grid) {
    grid.validate();
    const int rows = grid.rows(), cols = grid.cols();
    BinaryMask out(rows, cols);
    for (int c = 0; c < cols; ++c) {
        const double th = c * grid.angular_step * kPi / 180.0;
        const double ct = std::cos(th), st = std::sin(th);
        for (int r = 0; r < rows; ++r) {
            const int x = static_cast<int>(std::lround(grid.cx + r * ct));
            const int y = static_cast<int>(std::lround(grid.cy - r * st));
            if (x >= 0 && x < mask.w && y >= 0 && y < mask.h) out.at(r, c) = mask.at(y, x);
        }
    }
    return out;
}

BinaryMask from_polar(const BinaryMask& polar_mask, const PolarGrid& grid, int out_h, int out_w) {
    grid.validate();
    const int rows = grid.rows(), cols = grid.cols();
    if (polar_mask.h != rows || polar_mask.w != cols)
        throw std::invalid_argument("from_polar: polar mask does not match grid dims");
    BinaryMask out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const double dx = x - grid.cx;
            const double dy = grid.cy - y;
            const double d = std::hypot(dx, dy);
            if (d >= static_cast<double>(grid.max_radius)) continue;
            double th = std::atan2(dy, dx) * 180.0 / kPi;
            if (th < 0) th += 360.0;
            int ri = static_cast<int>(std::lround(d));
            if (ri >= rows) ri = rows - 1;
            const int ci = static_cast<int>(std::lround(th / grid.angular_step)) % cols;
            out.at(y, x) = polar_mask.at(ri, ci);
        }
    }
    return out;
}

double round_trip_dsc(const BinaryMask& mask, const PolarGrid& grid) {
    BinaryMask restricted(mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            const double d = std::hypot(x - grid.cx, grid.cy - y);
            if (d < static_cast<double>(grid.max_radius)) restricted.at(y, x) = mask.at(y, x);
        }
    const BinaryMask back = from_polar(mask_to_polar(mask, grid), grid, mask.h, mask.w);
    return dsc(restricted, back);
}

} // namespace fedseg
