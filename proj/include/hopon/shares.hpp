#pragma once

#include <numeric>
#include <span>
#include <vector>

namespace hopon {

/// Splits `total` proportionally to `weights`; the last entry absorbs
/// rounding so the shares add up to `total`. All-zero weights split evenly.
inline std::vector<double> proportional_shares(double total, std::span<const double> weights) {
    std::vector<double> out(weights.size(), 0.0);
    if (weights.empty()) return out;
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    double assigned = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        out[i] = sum > 0 ? total * weights[i] / sum : total / static_cast<double>(weights.size());
        assigned += out[i];
    }
    out.back() = total - assigned;
    return out;
}

}  // namespace hopon
