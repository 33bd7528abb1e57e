#pragma once

#include <filesystem>

#include "eventfly/types.hpp"

namespace eventfly {

// Binary file formats, all little-endian:
//
//   .evt  magic "EVT1", W (u32), H (u32), N (u64),
//         then N records of { x: u16, y: u16, t: i64 microseconds, p: i8 }.
//   .vxg  magic "VXG1", T (u32), H (u32), W (u32),
//         then T*H*W float32 values in (t, h, w) C-order.
//   .lbl  magic "LBL1", H (u32), W (u32), num_classes (u8),
//         then H*W u8 class ids; 255 = ignore.
//   .msk  magic "MSK1", H (u32), W (u32),
//         then H rows, each ceil(W/8) bytes, bit 0 of each byte first.
//
// Readers throw FormatError naming the byte offset of the defect.

EventStream read_events(const std::filesystem::path& path);
void write_events(const EventStream& stream, const std::filesystem::path& path);

VoxelGrid read_voxel(const std::filesystem::path& path);
void write_voxel(const VoxelGrid& grid, const std::filesystem::path& path);

LabelMap read_labels(const std::filesystem::path& path);
void write_labels(const LabelMap& labels, const std::filesystem::path& path);

BlendMask read_mask(const std::filesystem::path& path);
void write_mask(const BlendMask& mask, const std::filesystem::path& path);

// 8-bit PGM, values scaled so the map maximum becomes 255 (zero map stays zero).
void write_pgm(const DensityMap& map, const std::filesystem::path& path);

// Density round-trips exactly as a single-bin voxel grid.
VoxelGrid density_as_voxel(const DensityMap& map);
DensityMap voxel_as_density(const VoxelGrid& grid);

// Writes to <path>.tmp in the same directory, then renames over the target.
class AtomicFile {
public:
    explicit AtomicFile(const std::filesystem::path& path);
    ~AtomicFile();
    const std::filesystem::path& temp_path() const { return temp_; }
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    bool committed_ = false;
};

}  // namespace eventfly
