#include "eventfly/blend.hpp"

#include <cmath>
#include <cstring>

#include "eventfly/io.hpp"

namespace eventfly {

VoxelGrid blend_voxels(const VoxelGrid& src, const VoxelGrid& tgt, const BlendMask& mask) {
    if (!src.same_shape(tgt))
        throw ShapeError("blend: source and target voxel dims disagree");
    if (mask.height != src.height || mask.width != src.width)
        throw ShapeError("blend: mask dims do not match the voxel grids");
    VoxelGrid out = tgt;
    const std::size_t plane = static_cast<std::size_t>(src.height) * src.width;
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (!mask.bits[i]) continue;
        for (int t = 0; t < src.bins; ++t) out.data[t * plane + i] = src.data[t * plane + i];
    }
    return out;
}

LabelMap blend_labels(const LabelMap& src, const LabelMap& pseudo, const BlendMask& mask) {
    if (src.height != pseudo.height || src.width != pseudo.width)
        throw ShapeError("blend: label dims disagree");
    if (mask.height != src.height || mask.width != src.width)
        throw ShapeError("blend: mask dims do not match the labels");
    LabelMap out = pseudo;
    out.num_classes = src.num_classes;
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) out.data[i] = src.data[i];
    return out;
}

LabelMap pseudo_labels(const ProbMap& probs, double confidence) {
    const std::size_t plane = static_cast<std::size_t>(probs.height) * probs.width;
    LabelMap out(probs.height, probs.width, static_cast<std::uint8_t>(probs.classes));
    for (std::size_t i = 0; i < plane; ++i) {
        double sum = 0.0;
        double best = -1.0;
        int best_c = 0;
        for (int c = 0; c < probs.classes; ++c) {
            const double p = probs.data[c * plane + i];
            sum += p;
            if (p > best) {
                best = p;
                best_c = c;
            }
        }
        if (std::fabs(sum - 1.0) > 1e-5)
            throw DomainError("pseudo-labels need normalized probabilities (sum " +
                              std::to_string(sum) + ")");
        out.data[i] = best >= confidence ? static_cast<std::uint8_t>(best_c) : LabelMap::kIgnore;
    }
    return out;
}

void write_blended(const BlendedSample& sample, const std::filesystem::path& stem) {
    write_voxel(sample.voxel, stem.string() + ".vxg");
    write_labels(sample.labels, stem.string() + ".lbl");
    write_mask(sample.mask, stem.string() + ".msk");
}

}  // namespace eventfly
