#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eventfly {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent on-disk data; message names the byte offset.
class FormatError : public Error {
public:
    using Error::Error;
};

// Dimension disagreement between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Out-of-range or unknown configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerically invalid input (unnormalized probabilities, bad label id, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Training stopped because a loss term went non-finite; message names the term.
class TrainAbort : public Error {
public:
    using Error::Error;
};

struct Event {
    std::uint16_t x = 0;     // pixel column
    std::uint16_t y = 0;     // pixel row
    std::int64_t t = 0;      // timestamp, microseconds
    std::int8_t p = 1;       // polarity, -1 or +1
};

struct EventStream {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<Event> events;  // non-decreasing in t

    // Initial timestamp; 0 for an empty stream.
    std::int64_t t0() const { return events.empty() ? 0 : events.front().t; }

    // Throws DomainError if any invariant is violated.
    void validate() const;
};

struct VoxelGrid {
    int bins = 0;    // temporal bins
    int height = 0;
    int width = 0;
    std::vector<float> data;  // (t, h, w) C-order

    VoxelGrid() = default;
    VoxelGrid(int bins_, int height_, int width_)
        : bins(bins_), height(height_), width(width_),
          data(static_cast<std::size_t>(bins_) * height_ * width_, 0.0f) {}

    float& at(int t, int h, int w) {
        return data[(static_cast<std::size_t>(t) * height + h) * width + w];
    }
    float at(int t, int h, int w) const {
        return data[(static_cast<std::size_t>(t) * height + h) * width + w];
    }
    bool same_shape(const VoxelGrid& o) const {
        return bins == o.bins && height == o.height && width == o.width;
    }
};

struct LabelMap {
    static constexpr std::uint8_t kIgnore = 255;

    int height = 0;
    int width = 0;
    std::uint8_t num_classes = 0;
    std::vector<std::uint8_t> data;  // (h, w); class id or kIgnore

    LabelMap() = default;
    LabelMap(int height_, int width_, std::uint8_t num_classes_, std::uint8_t fill = 0)
        : height(height_), width(width_), num_classes(num_classes_),
          data(static_cast<std::size_t>(height_) * width_, fill) {}

    std::uint8_t& at(int h, int w) { return data[static_cast<std::size_t>(h) * width + w]; }
    std::uint8_t at(int h, int w) const { return data[static_cast<std::size_t>(h) * width + w]; }
};

// Per-pixel class probabilities, (c, h, w) C-order.
struct ProbMap {
    int classes = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ProbMap() = default;
    ProbMap(int classes_, int height_, int width_)
        : classes(classes_), height(height_), width(width_),
          data(static_cast<std::size_t>(classes_) * height_ * width_, 0.0) {}

    double& at(int c, int h, int w) {
        return data[(static_cast<std::size_t>(c) * height + h) * width + w];
    }
    double at(int c, int h, int w) const {
        return data[(static_cast<std::size_t>(c) * height + h) * width + w];
    }
};

// Per-pixel temporal sum of absolute voxel activations.
struct DensityMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    DensityMap() = default;
    DensityMap(int height_, int width_)
        : height(height_), width(width_),
          values(static_cast<std::size_t>(height_) * width_, 0.0) {}

    double& at(int h, int w) { return values[static_cast<std::size_t>(h) * width + w]; }
    double at(int h, int w) const { return values[static_cast<std::size_t>(h) * width + w]; }
    bool same_shape(const DensityMap& o) const { return height == o.height && width == o.width; }
};

// Pixelwise activation-pattern similarity; pixels where neither side is
// activated carry no similarity value and are flagged undefined.
struct SimilarityMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;          // in [0,1] where defined
    std::vector<std::uint8_t> defined;   // 0/1

    SimilarityMap() = default;
    SimilarityMap(int height_, int width_)
        : height(height_), width(width_),
          values(static_cast<std::size_t>(height_) * width_, 0.0),
          defined(static_cast<std::size_t>(height_) * width_, 0) {}
};

struct BlendMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;  // 0 = take target column, 1 = keep source column

    BlendMask() = default;
    BlendMask(int height_, int width_, std::uint8_t fill = 0)
        : height(height_), width(width_),
          bits(static_cast<std::size_t>(height_) * width_, fill) {}

    std::uint8_t& at(int h, int w) { return bits[static_cast<std::size_t>(h) * width + w]; }
    std::uint8_t at(int h, int w) const { return bits[static_cast<std::size_t>(h) * width + w]; }
};

// High-activation region membership.
struct RegionMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    RegionMask() = default;
    RegionMask(int height_, int width_, std::uint8_t fill = 0)
        : height(height_), width(width_),
          bits(static_cast<std::size_t>(height_) * width_, fill) {}

    std::uint8_t& at(int h, int w) { return bits[static_cast<std::size_t>(h) * width + w]; }
    std::uint8_t at(int h, int w) const { return bits[static_cast<std::size_t>(h) * width + w]; }
    std::size_t count() const;
};

}  // namespace eventfly
