#include "fedseg/unet.hpp"

#include "fedseg/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fedseg {

void UNetConfig::validate() const {
    if (depth < 1) throw std::invalid_argument("unet: depth must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("unet: base_channels must be >= 1");
    const int div = 1 << depth;
    if (in_h <= 0 || in_w <= 0 || in_h % div != 0 || in_w % div != 0)
        throw std::invalid_argument("unet: spatial dims " + std::to_string(in_h) + "x" +
                                    std::to_string(in_w) + " not divisible by 2^depth");
}

UNetModel build_model(const UNetConfig& config, AdamHyper hyper) {
    UNetModel m;
    m.config = config;
    m.params = unet_layout<float>(config);
    Rng rng(derive_seed(config.seed, 0x756e6574 /* "unet" */));
    for (auto& [name, t] : m.params.items) {
        if (name.ends_with(".bias")) continue; // biases stay zero
        // fan_in = Cin * K * K for OxCxKxK weights
        const double fan_in = static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
        const double scale = std::sqrt(2.0 / fan_in);
        for (float& v : t.data) v = static_cast<float>(rng.gaussian() * scale);
    }
    m.adam = make_adam_state(m.params, hyper);
    return m;
}

int64_t unet_param_count(const UNetConfig& config) {
    return unet_layout<float>(config).total_values();
}

} // namespace fedseg
