#pragma once

#include "eventfly/types.hpp"

namespace eventfly {

// Maps a timestamp to a real bin coordinate in [0, bins-1]:
//   (bins - 1) * (t - t0) / duration, clamped to the bin range.
// Throws ConfigError for duration <= 0 or bins < 1.
double normalize_timestamp(std::int64_t t, std::int64_t t0, std::int64_t duration_us, int bins);

// Bilinear temporal kernel split of one unit of mass at a bin coordinate.
// lo_weight + hi_weight == 1.0 exactly; hi_bin == lo_bin when the coordinate
// is integral or sits on the last bin.
struct TemporalSplit {
    int lo_bin = 0;
    int hi_bin = 0;
    double lo_weight = 1.0;
    double hi_weight = 0.0;
};
TemporalSplit temporal_split(double bin_coord, int bins);

// Accumulates a stream into a (bins, H, W) grid. Each event contributes its
// polarity, split across the two nearest temporal bins; events outside the
// window clamp to the boundary bins. An empty stream yields a zero grid.
VoxelGrid voxelize(const EventStream& stream, int bins, std::int64_t duration_us);

// Same, reusing the caller's grid storage.
void voxelize_into(const EventStream& stream, int bins, std::int64_t duration_us, VoxelGrid& out);

}  // namespace eventfly
