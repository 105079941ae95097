#include "fedseg/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fedseg {

namespace {

void write_p5(const std::string& path, int h, int w, const std::vector<uint8_t>& pixels) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("pgm: cannot open " + path + " for writing");
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw std::runtime_error("pgm: write failed for " + path);
}

std::vector<uint8_t> read_p5(const std::string& path, int& h, int& w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pgm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("pgm: not a P5 file: " + path);
    int maxval = 0;
    f >> w >> h >> maxval;
    if (!f || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("pgm: unsupported header in " + path);
    f.get(); // single whitespace after maxval
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w);
    f.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw std::runtime_error("pgm: truncated pixel data in " + path);
    return pixels;
}

} // namespace

void pgm_save(const Tensor& image, const std::string& path) {
    if (image.rank() != 3 || image.shape[0] != 1)
        throw std::invalid_argument("pgm: image must be 1xHxW");
    const int h = image.shape[1], w = image.shape[2];
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < pixels.size(); ++i) {
        const double v = std::max(0.0, std::min(1.0, static_cast<double>(image.data[i])));
        pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    write_p5(path, h, w, pixels);
}

void pgm_save_mask(const BinaryMask& mask, const std::string& path) {
    std::vector<uint8_t> pixels(mask.bits.size());
    for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = mask.bits[i] ? 255 : 0;
    write_p5(path, mask.h, mask.w, pixels);
}

Tensor pgm_load(const std::string& path) {
    int h = 0, w = 0;
    const std::vector<uint8_t> pixels = read_p5(path, h, w);
    Tensor t({1, h, w});
    for (size_t i = 0; i < pixels.size(); ++i)
        t.data[i] = static_cast<float>(pixels[i]) / 255.0f;
    return t;
}

BinaryMask pgm_load_mask(const std::string& path) {
    int h = 0, w = 0;
    const std::vector<uint8_t> pixels = read_p5(path, h, w);
    BinaryMask m(h, w);
    for (size_t i = 0; i < pixels.size(); ++i) m.bits[i] = pixels[i] ? 1 : 0;
    return m;
}

} // namespace fedseg
