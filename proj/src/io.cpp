#include "eventfly/io.hpp"

#include <cmath>
#include <fstream>

#include "binio.hpp"

namespace eventfly {

using detail::Reader;
using detail::Writer;

EventStream read_events(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("EVT1");
    EventStream s;
    s.width = r.u32("width");
    s.height = r.u32("height");
    const std::uint64_t n = r.u64("event count");
    s.events.reserve(n);
    std::int64_t prev_t = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::size_t record_at = r.offset();
        Event e;
        e.x = r.u16("event record");
        e.y = r.u16("event record");
        e.t = r.i64("event record");
        e.p = r.i8("event record");
        if (e.x >= s.width) r.fail("x=" + std::to_string(e.x) + " out of range", record_at);
        if (e.y >= s.height) r.fail("y=" + std::to_string(e.y) + " out of range", record_at);
        if (e.p != -1 && e.p != 1) r.fail("polarity must be -1 or +1", record_at);
        if (i > 0 && e.t < prev_t) r.fail("timestamps must be non-decreasing", record_at);
        prev_t = e.t;
        s.events.push_back(e);
    }
    return s;
}

void write_events(const EventStream& stream, const std::filesystem::path& path) {
    stream.validate();
    Writer w(path);
    w.raw("EVT1", 4);
    w.u32(stream.width);
    w.u32(stream.height);
    w.u64(stream.events.size());
    for (const Event& e : stream.events) {
        w.u16(e.x);
        w.u16(e.y);
        w.i64(e.t);
        w.i8(e.p);
    }
    w.close();
}

VoxelGrid read_voxel(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("VXG1");
    const std::uint32_t bins = r.u32("bin count");
    const std::uint32_t height = r.u32("height");
    const std::uint32_t width = r.u32("width");
    if (bins == 0 || height == 0 || width == 0) r.fail("dimensions must be positive", 4);
    VoxelGrid g(static_cast<int>(bins), static_cast<int>(height), static_cast<int>(width));
    const std::size_t value_base = r.offset();
    r.raw(g.data.data(), g.data.size() * 4, "voxel data");
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (!std::isfinite(g.data[i])) r.fail("non-finite voxel value", value_base + 4 * i);
    }
    return g;
}

void write_voxel(const VoxelGrid& grid, const std::filesystem::path& path) {
    if (grid.bins <= 0 || grid.height <= 0 || grid.width <= 0)
        throw ShapeError("voxel grid dimensions must be positive");
    Writer w(path);
    w.raw("VXG1", 4);
    w.u32(static_cast<std::uint32_t>(grid.bins));
    w.u32(static_cast<std::uint32_t>(grid.height));
    w.u32(static_cast<std::uint32_t>(grid.width));
    w.raw(grid.data.data(), grid.data.size() * 4);
    w.close();
}

LabelMap read_labels(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("LBL1");
    LabelMap m;
    const std::uint32_t height = r.u32("height");
    const std::uint32_t width = r.u32("width");
    m.num_classes = r.u8("class count");
    if (height == 0 || width == 0) r.fail("dimensions must be positive", 4);
    m.height = static_cast<int>(height);
    m.width = static_cast<int>(width);
    m.data.resize(static_cast<std::size_t>(m.height) * m.width);
    const std::size_t value_base = r.offset();
    r.raw(m.data.data(), m.data.size(), "label data");
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (m.data[i] >= m.num_classes && m.data[i] != LabelMap::kIgnore)
            r.fail("label " + std::to_string(m.data[i]) + " out of range for " +
                       std::to_string(m.num_classes) + " classes",
                   value_base + i);
    }
    return m;
}

void write_labels(const LabelMap& labels, const std::filesystem::path& path) {
    for (std::uint8_t v : labels.data) {
        if (v >= labels.num_classes && v != LabelMap::kIgnore)
            throw DomainError("label value " + std::to_string(v) + " out of range");
    }
    Writer w(path);
    w.raw("LBL1", 4);
    w.u32(static_cast<std::uint32_t>(labels.height));
    w.u32(static_cast<std::uint32_t>(labels.width));
    w.u8(labels.num_classes);
    w.raw(labels.data.data(), labels.data.size());
    w.close();
}

BlendMask read_mask(const std::filesystem::path& path) {
    Reader r(path);
    r.expect_magic("MSK1");
    const std::uint32_t height = r.u32("height");
    const std::uint32_t width = r.u32("width");
    if (height == 0 || width == 0) r.fail("dimensions must be positive", 4);
    BlendMask m(static_cast<int>(height), static_cast<int>(width));
    const std::size_t row_bytes = (width + 7) / 8;
    std::vector<std::uint8_t> row(row_bytes);
    for (std::uint32_t h = 0; h < height; ++h) {
        r.raw(row.data(), row_bytes, "mask row");
        for (std::uint32_t x = 0; x < width; ++x)
            m.at(static_cast<int>(h), static_cast<int>(x)) = (row[x >> 3] >> (x & 7)) & 1;
    }
    return m;
}

void write_mask(const BlendMask& mask, const std::filesystem::path& path) {
    Writer w(path);
    w.raw("MSK1", 4);
    w.u32(static_cast<std::uint32_t>(mask.height));
    w.u32(static_cast<std::uint32_t>(mask.width));
    const std::size_t row_bytes = (static_cast<std::size_t>(mask.width) + 7) / 8;
    std::vector<std::uint8_t> row(row_bytes);
    for (int h = 0; h < mask.height; ++h) {
        std::fill(row.begin(), row.end(), 0);
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(h, x)) row[x >> 3] |= static_cast<std::uint8_t>(1u << (x & 7));
        w.raw(row.data(), row_bytes);
    }
    w.close();
}

void write_pgm(const DensityMap& map, const std::filesystem::path& path) {
    double max_v = 0.0;
    for (double v : map.values) max_v = std::max(max_v, v);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << map.width << " " << map.height << "\n255\n";
    std::vector<std::uint8_t> row(map.width);
    for (int h = 0; h < map.height; ++h) {
        for (int x = 0; x < map.width; ++x) {
            const double v = max_v > 0.0 ? map.at(h, x) / max_v : 0.0;
            row[x] = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, std::max(0.0, v))));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

VoxelGrid density_as_voxel(const DensityMap& map) {
    VoxelGrid g(1, map.height, map.width);
    for (std::size_t i = 0; i < map.values.size(); ++i) g.data[i] = static_cast<float>(map.values[i]);
    return g;
}

DensityMap voxel_as_density(const VoxelGrid& grid) {
    if (grid.bins != 1) throw ShapeError("expected a single-bin grid");
    DensityMap m(grid.height, grid.width);
    for (std::size_t i = 0; i < grid.data.size(); ++i) m.values[i] = grid.data[i];
    return m;
}

AtomicFile::AtomicFile(const std::filesystem::path& path)
    : target_(path), temp_(path.string() + ".tmp") {}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicFile::commit() {
    std::filesystem::rename(temp_, target_);
    committed_ = true;
}

}  // namespace eventfly
