#pragma once

#include <span>
#include <string>

#include "eventfly/types.hpp"

namespace eventfly {

// Pixels with normalized density above this are considered activated.
inline constexpr double kActivationEpsilon = 1e-6;

// D(h, w) = sum_t |V(t, h, w)|.
DensityMap density_map(const VoxelGrid& grid);

// Mean of the per-sample densities across a split.
DensityMap aggregate_target_density(std::span<const VoxelGrid> grids);

// Streaming variant of aggregate_target_density for splits too large to hold.
class DensityAccumulator {
public:
    void add(const VoxelGrid& grid);
    DensityMap mean() const;
    std::size_t count() const { return count_; }

private:
    DensityMap sum_;
    std::size_t count_ = 0;
};

enum class NormalizeMode { kMax, kQuantile };

struct DensityNormalize {
    NormalizeMode mode = NormalizeMode::kMax;
    double quantile = 0.5;  // only for kQuantile
};

// Parses "max" or "quantile-q" (e.g. "quantile-0.9"). Throws ConfigError.
DensityNormalize parse_normalize_mode(const std::string& text);

// Rescales a density map into [0,1]. Mode max divides by the maximum (zero
// maps pass through); mode quantile-q divides by the q-th quantile and clamps.
DensityMap normalize_density(const DensityMap& map, const DensityNormalize& mode);

// SIM = 1 - |src - tgt| on pixels where at least one side is activated;
// pixels with both sides inactive are flagged undefined. Inputs must already
// be normalized into [0,1].
SimilarityMap similarity_map(const DensityMap& src_norm, const DensityMap& tgt_norm,
                             double activation_eps = kActivationEpsilon);

// Mask = 1 where SIM >= tau; undefined pixels keep the source (mask = 1).
BlendMask binary_mask(const SimilarityMap& sim, double tau);

// Pixels whose aggregated density reaches the q-th quantile of the positive
// densities (ties included). A zero map yields an empty region.
RegionMask high_activation_region(const DensityMap& aggregated, double q);

struct EntropyResult {
    double nats = 0.0;
    bool region_empty = false;
};

// Mean over region pixels of -sum_c p log p, natural log, 0 log 0 = 0.
// Probability columns must sum to 1 within 1e-5.
EntropyResult empirical_entropy(const ProbMap& probs, const RegionMask& region);

// Linear interpolation between order statistics (values are copied and sorted).
double quantile_linear(std::vector<double> values, double q);

}  // namespace eventfly
