#pragma once

#include <cstdint>
#include <filesystem>

#include "eventfly/types.hpp"

namespace eventfly {

// Column-wise splice: the full temporal sequence of each spatial location is
// taken from the source where mask = 1 and from the target where mask = 0.
VoxelGrid blend_voxels(const VoxelGrid& src, const VoxelGrid& tgt, const BlendMask& mask);

// Label counterpart: source ground truth where mask = 1, pseudo-labels where
// mask = 0. Ignore values (255) propagate.
LabelMap blend_labels(const LabelMap& src, const LabelMap& pseudo, const BlendMask& mask);

// Argmax labels where the winning probability reaches the confidence
// threshold, 255 elsewhere. Ties break toward the lowest class id.
LabelMap pseudo_labels(const ProbMap& probs, double confidence);

struct BlendedSample {
    VoxelGrid voxel;
    LabelMap labels;
    BlendMask mask;
    std::int64_t source_id = -1;
    std::int64_t target_id = -1;
};

// Persists a blended sample as <stem>.vxg + <stem>.lbl + <stem>.msk.
void write_blended(const BlendedSample& sample, const std::filesystem::path& stem);

}  // namespace eventfly
