#include "eventfly/bench.hpp"

#include <algorithm>
#include <cmath>

#include "eventfly/eap.hpp"
#include "eventfly/log.hpp"
#include "eventfly/rng.hpp"
#include "eventfly/voxel.hpp"

namespace eventfly {

namespace {

constexpr std::int64_t kWindowUs = 5'000'000;
constexpr std::uint8_t kUnpainted = 254;

// 19-class ids
enum : int {
    kRoad = 0,
    kSidewalk = 1,
    kBuilding = 2,
    kWall = 3,
    kFence = 4,
    kPole = 5,
    kTrafficLight = 6,
    kTrafficSign = 7,
    kVegetation = 8,
    kTerrain = 9,
    kSky = 10,
    kPerson = 11,
    kRider = 12,
    kCar = 13,
    kTruck = 14,
    kBus = 15,
    kTrain = 16,
    kMotorcycle = 17,
    kBicycle = 18,
};

constexpr bool is_dynamic_class(int c) { return c >= kPerson; }

// Relative event-texture strength of each surface under motion; sky is
// nearly silent, foliage and thin structures flicker the most.
constexpr std::array<double, kNumClasses19> kTextureRate = {
    0.25, 0.30, 0.45, 0.40, 0.60, 0.50, 0.50, 0.50, 0.70, 0.35,
    0.02, 0.60, 0.60, 0.50, 0.45, 0.45, 0.50, 0.55, 0.60};

// Per-platform pixel shares measured over the three-platform corpus.
constexpr std::array<double, kNumClasses19> kVehicleFreq = {
    0.2194, 0.0663, 0.2491, 0.0047, 0.0055, 0.0221, 0.0022, 0.0045, 0.2377, 0.0178,
    0.0653, 0.0082, 0.0002, 0.0736, 0.0101, 0.0105, 0.0009, 0.0001, 0.0015};
constexpr std::array<double, kNumClasses19> kDroneFreq = {
    0.3451, 0.0636, 0.0496, 0.0063, 0.0097, 0.0033, 0.0000, 0.0008, 0.1452, 0.3146,
    0.0163, 0.0005, 0.0000, 0.0414, 0.0024, 0.0009, 0.0001, 0.0001, 0.0001};
constexpr std::array<double, kNumClasses19> kQuadrupedFreq = {
    0.1898, 0.0709, 0.1293, 0.0546, 0.0491, 0.0056, 0.0000, 0.0001, 0.2665, 0.1218,
    0.0868, 0.0156, 0.0003, 0.0091, 0.0000, 0.0000, 0.0000, 0.0000, 0.0003};

struct ObjectRule {
    int class_id;
    double r0, r1;          // center row range, fraction of height
    double c0, c1;          // center column range, fraction of width
    double h0, h1;          // rect height range, pixels at 90-row scale
    double aspect0, aspect1;
};

struct Slot {
    int class_id;
    std::size_t pixels;
};

struct Layout {
    std::vector<ObjectRule> objects;  // painted first, i.e. on top
    std::vector<Slot> slots;          // horizontal fill, top to bottom
    int overflow_class = kTerrain;
};

std::array<std::size_t, kNumClasses19> make_budgets(const PlatformProfile& profile, Rng& rng) {
    const std::size_t total = static_cast<std::size_t>(profile.height) * profile.width;
    std::array<double, kNumClasses19> jittered{};
    double sum = 0.0;
    for (int c = 0; c < kNumClasses19; ++c) {
        jittered[c] = profile.class_frequency[c] * rng.uniform(0.9, 1.1);
        sum += jittered[c];
    }
    std::array<std::size_t, kNumClasses19> budget{};
    std::array<double, kNumClasses19> frac{};
    std::size_t assigned = 0;
    for (int c = 0; c < kNumClasses19; ++c) {
        const double exact = jittered[c] / sum * static_cast<double>(total);
        budget[c] = static_cast<std::size_t>(exact);
        frac[c] = exact - static_cast<double>(budget[c]);
        assigned += budget[c];
    }
    while (assigned < total) {  // largest remainder, ties toward low class ids
        int best = 0;
        for (int c = 1; c < kNumClasses19; ++c)
            if (frac[c] > frac[best]) best = c;
        budget[best] += 1;
        frac[best] = -1.0;
        ++assigned;
    }
    return budget;
}

void add_band(Layout& layout, int class_id, double share,
              const std::array<std::size_t, kNumClasses19>& budget) {
    layout.slots.push_back(
        {class_id, static_cast<std::size_t>(share * static_cast<double>(budget[class_id]) + 0.5)});
}

Layout build_layout(const PlatformProfile& profile,
                    const std::array<std::size_t, kNumClasses19>& budget, Rng& rng) {
    Layout layout;
    switch (profile.platform) {
        case Platform::kVehicle: {
            layout.objects = {
                {kPole, 0.18, 0.62, 0.04, 0.96, 10, 26, 0.06, 0.12},
                {kTrafficLight, 0.20, 0.45, 0.1, 0.9, 2, 4, 0.7, 1.3},
                {kTrafficSign, 0.25, 0.55, 0.05, 0.95, 2, 4, 0.8, 1.6},
                {kTrain, 0.52, 0.62, 0.1, 0.9, 4, 7, 3.0, 5.0},
                {kCar, 0.70, 0.92, 0.08, 0.92, 4, 8, 1.6, 2.4},
                {kTruck, 0.68, 0.88, 0.1, 0.9, 6, 10, 1.8, 2.6},
                {kBus, 0.68, 0.88, 0.1, 0.9, 6, 10, 2.0, 2.8},
                {kMotorcycle, 0.72, 0.90, 0.1, 0.9, 2, 4, 1.2, 2.0},
                {kBicycle, 0.72, 0.90, 0.1, 0.9, 2, 4, 1.0, 1.8},
                {kPerson, 0.58, 0.72, 0.05, 0.95, 5, 9, 0.3, 0.5},
                {kRider, 0.60, 0.74, 0.05, 0.95, 4, 8, 0.3, 0.5},
            };
            for (int c : {kSky, kBuilding, kVegetation, kWall, kFence, kSidewalk, kRoad, kTerrain})
                add_band(layout, c, 1.0, budget);
            break;
        }
        case Platform::kDrone: {
            // Road altitude varies scene to scene: terrain is split around it.
            const double upper = rng.uniform(0.15, 0.85);
            add_band(layout, kSky, 1.0, budget);
            add_band(layout, kTerrain, upper, budget);
            add_band(layout, kSidewalk, 0.5, budget);
            add_band(layout, kRoad, 1.0, budget);
            add_band(layout, kSidewalk, 0.5, budget);
            add_band(layout, kTerrain, 1.0 - upper, budget);
            // Nominal road row range for placing ground objects.
            const double total = static_cast<double>(profile.height) * profile.width;
            double cum = (static_cast<double>(budget[kSky]) +
                          upper * static_cast<double>(budget[kTerrain]) +
                          0.5 * static_cast<double>(budget[kSidewalk])) /
                         total;
            const double road_h = static_cast<double>(budget[kRoad]) / total;
            const double r0 = std::max(0.02, cum - 0.06);
            const double r1 = std::min(0.98, cum + road_h + 0.06);
            layout.objects = {
                {kBuilding, 0.06, 0.94, 0.05, 0.95, 6, 14, 1.2, 2.5},
                {kVegetation, 0.06, 0.94, 0.05, 0.95, 5, 12, 1.5, 3.0},
                {kWall, 0.10, 0.90, 0.05, 0.95, 2, 4, 3.0, 6.0},
                {kFence, 0.10, 0.90, 0.05, 0.95, 1, 3, 4.0, 8.0},
                {kPole, 0.10, 0.90, 0.05, 0.95, 2, 5, 0.3, 0.6},
                {kTrafficSign, 0.10, 0.90, 0.05, 0.95, 1, 2, 0.8, 1.6},
                {kCar, r0, r1, 0.05, 0.95, 2, 5, 1.4, 2.2},
                {kTruck, r0, r1, 0.05, 0.95, 3, 6, 1.6, 2.4},
                {kBus, r0, r1, 0.05, 0.95, 3, 6, 1.8, 2.6},
                {kTrain, r0, r1, 0.05, 0.95, 2, 4, 3.0, 5.0},
                {kMotorcycle, r0, r1, 0.05, 0.95, 1, 2, 1.2, 2.0},
                {kBicycle, r0, r1, 0.05, 0.95, 1, 2, 1.0, 1.8},
                {kPerson, r0, r1, 0.05, 0.95, 1, 3, 0.5, 1.0},
            };
            break;
        }
        case Platform::kQuadruped: {
            layout.objects = {
                {kPole, 0.20, 0.70, 0.05, 0.95, 8, 20, 0.06, 0.12},
                {kTrafficSign, 0.30, 0.60, 0.1, 0.9, 2, 3, 0.8, 1.6},
                {kCar, 0.60, 0.85, 0.1, 0.9, 3, 6, 1.5, 2.2},
                {kBicycle, 0.60, 0.85, 0.1, 0.9, 2, 4, 1.0, 1.8},
                {kPerson, 0.45, 0.80, 0.05, 0.95, 6, 12, 0.3, 0.5},
                {kRider, 0.50, 0.80, 0.05, 0.95, 5, 10, 0.3, 0.5},
            };
            for (int c : {kSky, kVegetation, kBuilding, kWall, kFence, kSidewalk, kRoad, kTerrain})
                add_band(layout, c, 1.0, budget);
            break;
        }
    }
    return layout;
}

// Paints rectangles for one object class until its pixel budget is consumed.
void paint_objects(LabelMap& labels, const ObjectRule& rule, std::size_t target, Rng& rng) {
    if (target == 0) return;
    const int height = labels.height;
    const int width = labels.width;
    const double scale = static_cast<double>(height) / 90.0;
    std::size_t painted = 0;
    int tries = 0;
    while (painted < target && tries < 4000) {
        ++tries;
        const double rh = rng.uniform(rule.h0, rule.h1) * scale;
        const double rw = rh * rng.uniform(rule.aspect0, rule.aspect1);
        const int bh = std::max(1, static_cast<int>(rh + 0.5));
        const int bw = std::max(1, static_cast<int>(rw + 0.5));
        const int cy = static_cast<int>(rng.uniform(rule.r0, rule.r1) * height);
        const int cx = static_cast<int>(rng.uniform(rule.c0, rule.c1) * width);
        const int y0 = std::clamp(cy - bh / 2, 0, height - 1);
        const int x0 = std::clamp(cx - bw / 2, 0, width - 1);
        const int y1 = std::min(height, y0 + bh);
        const int x1 = std::min(width, x0 + bw);
        for (int y = y0; y < y1 && painted < target; ++y) {
            for (int x = x0; x < x1 && painted < target; ++x) {
                std::uint8_t& px = labels.at(y, x);
                if (px == kUnpainted) {
                    px = static_cast<std::uint8_t>(rule.class_id);
                    ++painted;
                }
            }
        }
    }
}

// Fills the remaining pixels top to bottom from the band slots.
void paint_bands(LabelMap& labels, const Layout& layout) {
    std::size_t slot_idx = 0;
    std::size_t slot_left = layout.slots.empty() ? 0 : layout.slots[0].pixels;
    for (std::uint8_t& px : labels.data) {
        if (px != kUnpainted) continue;
        while (slot_left == 0 && slot_idx + 1 < layout.slots.size()) {
            ++slot_idx;
            slot_left = layout.slots[slot_idx].pixels;
        }
        if (slot_left == 0) {
            px = static_cast<std::uint8_t>(layout.overflow_class);
            continue;
        }
        px = static_cast<std::uint8_t>(layout.slots[slot_idx].class_id);
        --slot_left;
    }
}

}  // namespace

Platform platform_from_string(const std::string& name) {
    if (name == "vehicle") return Platform::kVehicle;
    if (name == "drone") return Platform::kDrone;
    if (name == "quadruped") return Platform::kQuadruped;
    throw ConfigError("unknown platform \"" + name + "\"");
}

std::string to_string(Platform platform) {
    switch (platform) {
        case Platform::kVehicle: return "vehicle";
        case Platform::kDrone: return "drone";
        case Platform::kQuadruped: return "quadruped";
    }
    throw ConfigError("bad platform value");
}

PlatformProfile PlatformProfile::make(Platform platform, int height, int width) {
    if (height < 16 || width < 16) throw ConfigError("scene dimensions too small");
    PlatformProfile p;
    p.platform = platform;
    p.height = height;
    p.width = width;
    switch (platform) {
        case Platform::kVehicle:
            p.class_frequency = kVehicleFreq;
            p.motion = {3.0, 0.8, 0.0, 0.35, 5.0, 0.55, 0.02};
            break;
        case Platform::kDrone:
            p.class_frequency = kDroneFreq;
            p.motion = {1.7, 0.5, 1.5707963267948966, 1.3, 2.5, 0.55, 0.02};
            break;
        case Platform::kQuadruped:
            p.class_frequency = kQuadrupedFreq;
            p.motion = {2.3, 1.0, 0.0, 0.9, 3.5, 0.55, 0.03};
            break;
    }
    double sum = 0.0;
    for (double f : p.class_frequency) sum += f;
    for (double& f : p.class_frequency) f /= sum;
    return p;
}

DensityMap PlatformProfile::occupancy_prior(int class_id) const {
    if (class_id < 0 || class_id >= kNumClasses19)
        throw ConfigError("class id out of range for occupancy prior");
    // Empirical expectation over a fixed bank of seeds.
    constexpr int kSeeds = 48;
    DensityMap prior(height, width);
    double mass = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
        const SceneSample sample = generate_scene(*this, static_cast<std::uint64_t>(s));
        for (std::size_t i = 0; i < prior.values.size(); ++i) {
            if (sample.labels.data[i] == class_id) {
                prior.values[i] += 1.0;
                mass += 1.0;
            }
        }
    }
    if (mass > 0.0)
        for (double& v : prior.values) v /= mass;
    return prior;
}

SceneSample generate_scene(const PlatformProfile& profile, std::uint64_t seed) {
    Rng rng(seed ^ (0xE7F1u + 0x9E37u * static_cast<std::uint64_t>(profile.platform)));
    SceneSample out;
    const int height = profile.height;
    const int width = profile.width;
    out.labels = LabelMap(height, width, kNumClasses19, kUnpainted);

    const auto budget = make_budgets(profile, rng);
    const Layout layout = build_layout(profile, budget, rng);
    for (const ObjectRule& rule : layout.objects)
        paint_objects(out.labels, rule, budget[rule.class_id], rng);
    paint_bands(out.labels, layout);

    // Global flow for this window.
    const MotionModel& mm = profile.motion;
    const double speed = std::max(0.3, mm.speed_mean + mm.speed_sigma * rng.normal());
    const double angle = mm.angle_mean + mm.angle_sigma * rng.normal();
    const double vx = speed * std::cos(angle);
    const double vy = speed * std::sin(angle);

    // One drift direction per dynamic class per scene.
    std::array<double, kNumClasses19> obj_vx{};
    std::array<double, kNumClasses19> obj_vy{};
    for (int c = kPerson; c < kNumClasses19; ++c) {
        const double phi = rng.uniform(0.0, 6.283185307179586);
        obj_vx[c] = mm.object_speed * std::cos(phi);
        obj_vy[c] = mm.object_speed * std::sin(phi);
    }

    std::vector<Event>& events = out.stream.events;
    out.stream.width = static_cast<std::uint32_t>(width);
    out.stream.height = static_cast<std::uint32_t>(height);

    auto emit = [&](int x, int y, double tfrac, int polarity) {
        if (x < 0 || x >= width || y < 0 || y >= height) return;
        Event e;
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.t = static_cast<std::int64_t>(tfrac * static_cast<double>(kWindowUs - 1));
        e.p = static_cast<std::int8_t>(polarity);
        events.push_back(e);
    };

    // Boundary pixels trigger events in proportion to the flow across them.
    auto edge_burst = [&](int x, int y, int cls, double nx, double ny) {
        const double along = vx * nx + vy * ny;
        const double strength = std::fabs(along);
        const double expected = mm.event_rate * strength;
        int k = static_cast<int>(expected);
        if (rng.uniform() < expected - k) ++k;
        const int base_pol = along >= 0.0 ? 1 : -1;
        for (int j = 0; j < k; ++j) {
            const int pol = rng.uniform() < 0.1 ? -base_pol : base_pol;
            emit(x, y, rng.uniform(), pol);
        }
        if (is_dynamic_class(cls)) {
            // Moving objects sweep their boundary across the window.
            constexpr int kSub = 3;
            for (int s = 0; s < kSub; ++s) {
                const double tf = (s + rng.uniform()) / kSub;
                const int sx = x + static_cast<int>(obj_vx[cls] * tf + 0.5);
                const int sy = y + static_cast<int>(obj_vy[cls] * tf + 0.5);
                emit(sx, sy, tf, rng.uniform() < 0.5 ? 1 : -1);
            }
        }
    };

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int cls = out.labels.at(y, x);
            if (x + 1 < width && out.labels.at(y, x + 1) != cls) edge_burst(x, y, cls, 1.0, 0.0);
            if (y + 1 < height && out.labels.at(y + 1, x) != cls) edge_burst(x, y, cls, 0.0, 1.0);
            // surface texture fires everywhere the scene moves
            const double expected = 0.35 * kTextureRate[cls] * speed;
            int k = static_cast<int>(expected);
            if (rng.uniform() < expected - k) ++k;
            for (int j = 0; j < k; ++j)
                emit(x, y, rng.uniform(), rng.uniform() < 0.5 ? 1 : -1);
        }
    }

    const std::size_t noise = static_cast<std::size_t>(mm.noise_fraction *
                                                       static_cast<double>(events.size()));
    for (std::size_t i = 0; i < noise; ++i)
        emit(rng.uniform_int(0, width - 1), rng.uniform_int(0, height - 1), rng.uniform(),
             rng.uniform() < 0.5 ? 1 : -1);

    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return out;
}

LabelMap map_labels(const LabelMap& labels, LabelMapping direction) {
    if (direction != LabelMapping::k19To11) throw ConfigError("unsupported label mapping");
    static constexpr std::array<std::uint8_t, kNumClasses19> kTable = {
        5, 6, 1, 9, 2, 4, 10, 10, 7, 0, 0, 3, 3, 8, 8, 8, 8, 8, 8};
    LabelMap out(labels.height, labels.width, kNumClasses11);
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        const std::uint8_t v = labels.data[i];
        if (v == LabelMap::kIgnore) {
            out.data[i] = LabelMap::kIgnore;
        } else if (v < kNumClasses19) {
            out.data[i] = kTable[v];
        } else {
            throw DomainError("label id " + std::to_string(v) + " outside the 19-class space");
        }
    }
    return out;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (classes != other.classes) throw ShapeError("confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void accumulate(ConfusionMatrix& cm, const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("confusion accumulation: prediction and ground truth dims disagree");
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const std::uint8_t g = gt.data[i];
        if (g == LabelMap::kIgnore) continue;
        const std::uint8_t p = pred.data[i];
        if (g >= cm.classes)
            throw DomainError("ground-truth label " + std::to_string(g) + " out of range");
        if (p >= cm.classes)
            throw DomainError("predicted label " + std::to_string(p) + " out of range");
        ++cm.at(g, p);
    }
}

Metrics metrics(const ConfusionMatrix& cm) {
    Metrics m;
    m.per_class_iou.assign(cm.classes, 0.0);
    m.class_present.assign(cm.classes, 0);
    std::uint64_t total = 0, trace = 0;
    std::vector<std::uint64_t> row(cm.classes, 0), col(cm.classes, 0);
    for (int g = 0; g < cm.classes; ++g) {
        for (int p = 0; p < cm.classes; ++p) {
            const std::uint64_t v = cm.at(g, p);
            total += v;
            row[g] += v;
            col[p] += v;
            if (g == p) trace += v;
        }
    }
    if (total == 0) {
        m.empty = true;
        log_warn("metrics over an empty confusion matrix");
        return m;
    }
    m.acc = static_cast<double>(trace) / static_cast<double>(total);

    double macc_sum = 0.0;
    int macc_n = 0;
    double miou_sum = 0.0;
    int miou_n = 0;
    double fiou = 0.0;
    for (int c = 0; c < cm.classes; ++c) {
        const std::uint64_t diag = cm.at(c, c);
        if (row[c] > 0) {
            macc_sum += static_cast<double>(diag) / static_cast<double>(row[c]);
            ++macc_n;
        }
        const std::uint64_t uni = row[c] + col[c] - diag;
        if (uni > 0) {
            m.class_present[c] = 1;
            const double iou = static_cast<double>(diag) / static_cast<double>(uni);
            m.per_class_iou[c] = iou;
            miou_sum += iou;
            ++miou_n;
            fiou += static_cast<double>(row[c]) / static_cast<double>(total) * iou;
        }
    }
    m.macc = macc_n ? macc_sum / macc_n : 0.0;
    m.miou = miou_n ? miou_sum / miou_n : 0.0;
    m.fiou = fiou;
    return m;
}

ActivationStats activation_stats(std::span<const EventStream> streams,
                                 std::span<const LabelMap> labels, int num_classes, int bins,
                                 std::int64_t duration_us) {
    if (streams.empty() || streams.size() != labels.size())
        throw ShapeError("activation stats need matching stream and label counts");
    ActivationStats stats;
    stats.per_class.assign(num_classes, DensityMap(labels[0].height, labels[0].width));
    stats.class_present.assign(num_classes, 0);
    stats.mean_density = DensityMap(labels[0].height, labels[0].width);

    const double inv_n = 1.0 / static_cast<double>(streams.size());
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const DensityMap norm =
            normalize_density(density_map(voxelize(streams[s], bins, duration_us)),
                              {NormalizeMode::kMax, 0.5});
        const LabelMap& lm = labels[s];
        if (lm.height != norm.height || lm.width != norm.width)
            throw ShapeError("activation stats: label and density dims disagree");
        for (std::size_t i = 0; i < norm.values.size(); ++i) {
            stats.mean_density.values[i] += norm.values[i] * inv_n;
            const std::uint8_t cls = lm.data[i];
            if (cls == LabelMap::kIgnore) continue;
            if (cls >= num_classes)
                throw DomainError("label id " + std::to_string(cls) + " out of range");
            stats.class_present[cls] = 1;
            stats.per_class[cls].values[i] += norm.values[i] * inv_n;
        }
    }
    return stats;
}

SequenceSplit split_sequences(const std::vector<std::vector<int>>& sequences, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0,1)");
    SequenceSplit out;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto& seq = sequences[s];
        if (seq.empty()) {
            log_warn("split: sequence " + std::to_string(s) + " is empty, skipped");
            continue;
        }
        const std::size_t n = seq.size();
        const std::size_t val_n =
            std::min(n, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n))));
        out.train.emplace_back(seq.begin(), seq.begin() + (n - val_n));
        out.val.emplace_back(seq.begin() + (n - val_n), seq.end());
    }
    return out;
}

}  // namespace eventfly
