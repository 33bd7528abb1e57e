#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "eventfly/types.hpp"

namespace eventfly {

inline constexpr int kNumClasses19 = 19;
inline constexpr int kNumClasses11 = 11;

enum class Platform { kVehicle, kDrone, kQuadruped };

Platform platform_from_string(const std::string& name);
std::string to_string(Platform platform);

struct MotionModel {
    double speed_mean = 2.0;      // global flow magnitude, pixels per window
    double speed_sigma = 0.6;
    double angle_mean = 0.0;      // flow direction, radians
    double angle_sigma = 0.5;
    double object_speed = 4.0;    // moving-object streak length, pixels per window
    double event_rate = 2.2;      // events per edge pixel per unit flow
    double noise_fraction = 0.02;
};

// Platform-specific scene statistics: 19-class pixel frequencies, spatial
// occupancy priors, and the motion model that drives event synthesis.
struct PlatformProfile {
    Platform platform = Platform::kVehicle;
    int height = 90;
    int width = 160;
    std::array<double, kNumClasses19> class_frequency{};  // sums to 1
    MotionModel motion;

    static PlatformProfile make(Platform platform, int height, int width);

    // Expected spatial occupancy of one class, normalized to sum 1.
    DensityMap occupancy_prior(int class_id) const;
};

struct SceneSample {
    EventStream stream;
    LabelMap labels;  // 19-class space
};

// Deterministic per (profile, seed): layered geometric label map whose class
// areas track the profile frequencies, plus boundary- and motion-driven
// events over a 5,000,000 us window.
SceneSample generate_scene(const PlatformProfile& profile, std::uint64_t seed);

enum class LabelMapping { k19To11 };

LabelMap map_labels(const LabelMap& labels, LabelMapping direction);

struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::uint64_t> counts;  // row = ground truth, column = prediction

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes_)
        : classes(classes_),
          counts(static_cast<std::size_t>(classes_) * classes_, 0) {}

    std::uint64_t& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * classes + pred];
    }
    std::uint64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * classes + pred];
    }
    void merge(const ConfusionMatrix& other);
};

// Ignore pixels (gt = 255) are skipped; out-of-range predictions are errors.
void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt);

struct Metrics {
    double acc = 0.0;
    double macc = 0.0;
    double miou = 0.0;
    double fiou = 0.0;
    std::vector<double> per_class_iou;       // 0 for absent classes
    std::vector<std::uint8_t> class_present; // present in gt or prediction
    bool empty = false;
};

Metrics metrics(const ConfusionMatrix& cm);

struct ActivationStats {
    std::vector<DensityMap> per_class;        // mean normalized density on class pixels
    std::vector<std::uint8_t> class_present;  // class appears in at least one sample
    DensityMap mean_density;
};

ActivationStats activation_stats(std::span<const EventStream> streams,
                                 std::span<const LabelMap> labels, int num_classes, int bins,
                                 std::int64_t duration_us);

struct SequenceSplit {
    std::vector<std::vector<int>> train;
    std::vector<std::vector<int>> val;
};

// The last ceil(ratio * N) frames of each sequence go to validation.
SequenceSplit split_sequences(const std::vector<std::vector<int>>& sequences, double ratio);

}  // namespace eventfly
