#include "eventfly/voxel.hpp"

#include <cmath>

namespace eventfly {

void EventStream::validate() const {
    std::int64_t prev = events.empty() ? 0 : events.front().t;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& e = events[i];
        if (e.x >= width)
            throw DomainError("event " + std::to_string(i) + ": x=" + std::to_string(e.x) +
                              " out of range for width " + std::to_string(width));
        if (e.y >= height)
            throw DomainError("event " + std::to_string(i) + ": y=" + std::to_string(e.y) +
                              " out of range for height " + std::to_string(height));
        if (e.p != -1 && e.p != 1)
            throw DomainError("event " + std::to_string(i) + ": polarity must be -1 or +1");
        if (e.t < prev)
            throw DomainError("event " + std::to_string(i) + ": timestamps must be non-decreasing");
        prev = e.t;
    }
}

std::size_t RegionMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b;
    return n;
}

double normalize_timestamp(std::int64_t t, std::int64_t t0, std::int64_t duration_us, int bins) {
    if (duration_us <= 0) throw ConfigError("window duration must be positive");
    if (bins < 1) throw ConfigError("bin count must be at least 1");
    const double coord = static_cast<double>(bins - 1) *
                         (static_cast<double>(t - t0) / static_cast<double>(duration_us));
    if (coord < 0.0) return 0.0;
    const double top = static_cast<double>(bins - 1);
    return coord > top ? top : coord;
}

TemporalSplit temporal_split(double bin_coord, int bins) {
    TemporalSplit s;
    int lo = static_cast<int>(std::floor(bin_coord));
    if (lo < 0) lo = 0;
    if (lo > bins - 1) lo = bins - 1;
    s.lo_bin = lo;
    if (lo == bins - 1) {
        s.hi_bin = lo;
        s.lo_weight = 1.0;
        s.hi_weight = 0.0;
        return s;
    }
    // Round-trip through the complement so the pair sums to exactly 1.
    const double hi = bin_coord - lo;
    s.lo_weight = 1.0 - hi;
    s.hi_weight = 1.0 - s.lo_weight;
    if (s.hi_weight == 0.0) {
        s.hi_bin = lo;
    } else {
        s.hi_bin = lo + 1;
    }
    return s;
}

void voxelize_into(const EventStream& stream, int bins, std::int64_t duration_us,
                   VoxelGrid& out) {
    if (duration_us <= 0) throw ConfigError("window duration must be positive");
    if (bins < 1) throw ConfigError("bin count must be at least 1");
    out.bins = bins;
    out.height = static_cast<int>(stream.height);
    out.width = static_cast<int>(stream.width);
    out.data.assign(static_cast<std::size_t>(bins) * out.height * out.width, 0.0f);
    if (stream.events.empty()) return;

    const std::size_t plane = static_cast<std::size_t>(out.height) * out.width;
    thread_local std::vector<double> acc;
    acc.assign(out.data.size(), 0.0);
    const std::int64_t t0 = stream.t0();
    for (const Event& e : stream.events) {
        const double coord = normalize_timestamp(e.t, t0, duration_us, bins);
        const TemporalSplit s = temporal_split(coord, bins);
        const std::size_t pix = static_cast<std::size_t>(e.y) * out.width + e.x;
        acc[s.lo_bin * plane + pix] += e.p * s.lo_weight;
        if (s.hi_bin != s.lo_bin) acc[s.hi_bin * plane + pix] += e.p * s.hi_weight;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i]);
}

VoxelGrid voxelize(const EventStream& stream, int bins, std::int64_t duration_us) {
    VoxelGrid grid;
    voxelize_into(stream, bins, duration_us, grid);
    return grid;
}

}  // namespace eventfly
