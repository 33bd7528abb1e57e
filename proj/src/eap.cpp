#include "eventfly/eap.hpp"

#include <algorithm>
#include <cmath>

namespace eventfly {

DensityMap density_map(const VoxelGrid& grid) {
    DensityMap m(grid.height, grid.width);
    const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
    for (int t = 0; t < grid.bins; ++t) {
        const float* src = grid.data.data() + t * plane;
        for (std::size_t i = 0; i < plane; ++i) m.values[i] += std::fabs(static_cast<double>(src[i]));
    }
    return m;
}

void DensityAccumulator::add(const VoxelGrid& grid) {
    DensityMap d = density_map(grid);
    if (count_ == 0) {
        sum_ = std::move(d);
    } else {
        if (!sum_.same_shape(d))
            throw ShapeError("density aggregation: sample dims " + std::to_string(d.height) + "x" +
                             std::to_string(d.width) + " do not match " +
                             std::to_string(sum_.height) + "x" + std::to_string(sum_.width));
        for (std::size_t i = 0; i < sum_.values.size(); ++i) sum_.values[i] += d.values[i];
    }
    ++count_;
}

DensityMap DensityAccumulator::mean() const {
    if (count_ == 0) throw DomainError("density aggregation over an empty split");
    DensityMap m = sum_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (double& v : m.values) v *= inv;
    return m;
}

DensityMap aggregate_target_density(std::span<const VoxelGrid> grids) {
    DensityAccumulator acc;
    for (const VoxelGrid& g : grids) acc.add(g);
    return acc.mean();
}

DensityNormalize parse_normalize_mode(const std::string& text) {
    if (text == "max") return {NormalizeMode::kMax, 0.5};
    if (text.rfind("quantile-", 0) == 0) {
        const std::string num = text.substr(9);
        std::size_t used = 0;
        double q = -1.0;
        try {
            q = std::stod(num, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad quantile in normalize mode \"" + text + "\"");
        }
        if (used != num.size() || !(q > 0.0 && q <= 1.0))
            throw ConfigError("quantile must be in (0,1] in normalize mode \"" + text + "\"");
        return {NormalizeMode::kQuantile, q};
    }
    throw ConfigError("unknown normalize mode \"" + text + "\" (expected max or quantile-q)");
}

DensityMap normalize_density(const DensityMap& map, const DensityNormalize& mode) {
    DensityMap out = map;
    double denom = 0.0;
    if (mode.mode == NormalizeMode::kMax) {
        for (double v : map.values) denom = std::max(denom, v);
    } else {
        if (!(mode.quantile > 0.0 && mode.quantile <= 1.0))
            throw ConfigError("normalize quantile must be in (0,1]");
        denom = quantile_linear(map.values, mode.quantile);
    }
    if (denom <= 0.0) return out;  // zero map passes through
    for (double& v : out.values) v = std::min(1.0, v / denom);
    return out;
}

SimilarityMap similarity_map(const DensityMap& src_norm, const DensityMap& tgt_norm,
                             double activation_eps) {
    if (!src_norm.same_shape(tgt_norm))
        throw ShapeError("similarity: source " + std::to_string(src_norm.height) + "x" +
                         std::to_string(src_norm.width) + " vs target " +
                         std::to_string(tgt_norm.height) + "x" + std::to_string(tgt_norm.width));
    constexpr double kTol = 1.0 + 1e-6;
    SimilarityMap sim(src_norm.height, src_norm.width);
    for (std::size_t i = 0; i < sim.values.size(); ++i) {
        const double a = src_norm.values[i];
        const double b = tgt_norm.values[i];
        if (a > kTol || b > kTol || a < 0.0 || b < 0.0)
            throw DomainError("similarity inputs must be normalized into [0,1]");
        if (a > activation_eps || b > activation_eps) {
            sim.defined[i] = 1;
            sim.values[i] = 1.0 - std::fabs(a - b);
        }
    }
    return sim;
}

BlendMask binary_mask(const SimilarityMap& sim, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("similarity threshold must be in [0,1]");
    BlendMask m(sim.height, sim.width);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        m.bits[i] = sim.defined[i] ? (sim.values[i] >= tau ? 1 : 0) : 1;
    return m;
}

RegionMask high_activation_region(const DensityMap& aggregated, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("region quantile must be in (0,1)");
    RegionMask region(aggregated.height, aggregated.width);
    std::vector<double> positive;
    positive.reserve(aggregated.values.size());
    for (double v : aggregated.values)
        if (v > 0.0) positive.push_back(v);
    if (positive.empty()) return region;
    const double cut = quantile_linear(std::move(positive), q);
    for (std::size_t i = 0; i < region.bits.size(); ++i)
        region.bits[i] = (aggregated.values[i] > 0.0 && aggregated.values[i] >= cut) ? 1 : 0;
    return region;
}

EntropyResult empirical_entropy(const ProbMap& probs, const RegionMask& region) {
    if (probs.height != region.height || probs.width != region.width)
        throw ShapeError("entropy: probability map and region dims disagree");
    const std::size_t plane = static_cast<std::size_t>(probs.height) * probs.width;
    for (std::size_t i = 0; i < plane; ++i) {
        double sum = 0.0;
        for (int c = 0; c < probs.classes; ++c) sum += probs.data[c * plane + i];
        if (std::fabs(sum - 1.0) > 1e-5)
            throw DomainError("probabilities must sum to 1 (got " + std::to_string(sum) + ")");
    }

    EntropyResult result;
    std::size_t n = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (!region.bits[i]) continue;
        double h = 0.0;
        for (int c = 0; c < probs.classes; ++c) {
            const double p = probs.data[c * plane + i];
            if (p > 0.0) h -= p * std::log(p);
        }
        total += h;
        ++n;
    }
    if (n == 0) {
        result.region_empty = true;
        return result;
    }
    result.nats = total / static_cast<double>(n);
    return result;
}

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace eventfly
