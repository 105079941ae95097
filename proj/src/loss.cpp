#include "fedseg/loss.hpp"

#include <cmath>

namespace fedseg {

double dsc(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dsc: shape mismatch");
    int64_t inter = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) {
        inter += a.bits[i] & b.bits[i];
        na += a.bits[i];
        nb += b.bits[i];
    }
    if (na + nb == 0) return 1.0; // empty/empty convention
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::pair<double, double> recall_precision(const BinaryMask& pred, const BinaryMask& truth) {
    if (!pred.same_shape(truth)) throw std::invalid_argument("recall_precision: shape mismatch");
    int64_t tp = 0, np = 0, nt = 0;
    for (size_t i = 0; i < pred.bits.size(); ++i) {
        tp += pred.bits[i] & truth.bits[i];
        np += pred.bits[i];
        nt += truth.bits[i];
    }
    const double recall = nt == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(nt);
    const double precision = np == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(np);
    return {recall, precision};
}

BlandAltmanResult bland_altman(const std::vector<double>& manual,
                               const std::vector<double>& auto_vals) {
    if (manual.size() != auto_vals.size())
        throw std::invalid_argument("bland_altman: length mismatch");
    const size_t n = manual.size();
    if (n < 2) throw std::invalid_argument("bland_altman: need at least 2 pairs");

    BlandAltmanResult r;
    r.points.reserve(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double diff = auto_vals[i] - manual[i];
        r.points.emplace_back((manual[i] + auto_vals[i]) / 2.0, diff);
        sum += diff;
    }
    r.mean_diff = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& [_, d] : r.points) ss += (d - r.mean_diff) * (d - r.mean_diff);
    r.sd_diff = std::sqrt(ss / static_cast<double>(n - 1));
    r.lower_limit = r.mean_diff - 1.96 * r.sd_diff;
    r.upper_limit = r.mean_diff + 1.96 * r.sd_diff;
    int64_t within = 0;
    for (const auto& [_, d] : r.points)
        if (d >= r.lower_limit && d <= r.upper_limit) ++within;
    r.fraction_within = static_cast<double>(within) / static_cast<double>(n);
    return r;
}

} // namespace fedseg
