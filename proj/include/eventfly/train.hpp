#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "eventfly/dataset.hpp"
#include "eventfly/eap.hpp"
#include "eventfly/losses.hpp"
#include "eventfly/net.hpp"

namespace eventfly {

enum class Pipeline { kSourceOnly, kBlendOnly, kFull };

Pipeline pipeline_from_string(const std::string& name);
std::string to_string(Pipeline pipeline);

struct TrainPaths {
    std::string source_train;
    std::string target_train;
    std::string target_val;
    std::string out_dir;
};

struct TrainConfig {
    double tau = 0.4;            // similarity threshold
    double lambda = 0.01;        // entropy regularizer weight
    double phi1 = 1e-3;          // source/blended adversarial weight
    double phi2 = 2e-3;          // blended/target adversarial weight
    double lr = 1e-3;
    int batch = 8;
    std::int64_t iterations = 1000;
    int bins = 20;
    std::int64_t duration_us = 5'000'000;
    int classes = 11;
    double region_quantile = 0.5;
    double tau_pl = 0.5;         // pseudo-label confidence floor; 0 disables filtering
    double ema_momentum = 0.999;
    double disc_lr_scale = 0.1;  // discriminators follow the schedule at this fraction
    std::uint64_t seed = 0;
    FeatureTap feature_tap = FeatureTap::kHead;
    Pipeline pipeline = Pipeline::kFull;
    bool entropy_on_blend = false;   // extend the entropy term to blended pixels
    bool eval_with_student = false;  // evaluate the student instead of the teacher
    std::int64_t checkpoint_every = 0;
    int enc1 = 6;
    int enc2 = 10;
    int feature_channels = 14;
    int disc_hidden = 10;
    TrainPaths paths;

    void validate() const;
    std::uint64_t digest() const;

    std::string to_json_string(int indent = -1) const;
    static TrainConfig from_json_string(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    SegNetConfig net_config() const;
    DiscriminatorConfig disc_config() const;
};

// One source/target pair batch, voxelized.
struct Batch {
    std::vector<VoxelGrid> src_voxels;
    std::vector<LabelMap> src_labels;
    std::vector<VoxelGrid> tgt_voxels;
};

struct RunState {
    TrainConfig cfg;
    SegNet student;
    EmaTeacher teacher;
    Discriminator disc1;  // source vs blended
    Discriminator disc2;  // target vs blended
    AdamW opt_student, opt_disc1, opt_disc2;
    std::int64_t step = 0;
    Rng rng_src{0};
    Rng rng_tgt{0};
    DensityMap target_density;  // aggregated over the target split, max-normalized
    RegionMask region;          // high-activation region of the target domain

    // reusable step buffers
    Workspace ws;
    SegForward fwd_src, fwd_blend, fwd_tgt, fwd_teacher;
    DiscForward dfw_1real, dfw_1fake, dfw_2real, dfw_2fake, dfw_adv1, dfw_adv2;
    Tensor t_src, t_tgt, t_blend;
    Tensor g_src, g_blend, g_tgt;
    Tensor g_real1, g_fake1, g_real2, g_fake2;
    Tensor g_p1, g_p2, g_feat1, g_feat2;
    std::vector<LabelMap> pseudo;
    std::vector<LabelMap> blended;
    std::vector<BlendMask> masks;
    std::vector<std::vector<std::uint8_t>> entropy_masks;
};

// Builds nets, optimizers and RNG streams; precomputes the region from the
// provided aggregated target density.
RunState init_run_state(const TrainConfig& cfg, const DensityMap& aggregated_target_density);

// One min-max iteration: teacher pseudo-labels, per-pair blending, a
// discriminator update with the generator frozen, a generator update with the
// discriminators frozen, then the EMA teacher update.
LossReport train_step(RunState& state, const Batch& batch);

// Argmax predictions of `net` over a labeled split.
Metrics evaluate(const SegNet& net, const Dataset& val, const TrainConfig& cfg);

struct RunArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    std::filesystem::path metrics_file;
    Metrics final_metrics;
};

// Full adaptation run against datasets loaded from cfg.paths.
RunArtifacts run_adaptation(const TrainConfig& cfg);

// Same, with the datasets supplied by the caller (cfg.paths.out_dir is still
// used for the checkpoint, log and metrics artifacts).
RunArtifacts run_adaptation(const TrainConfig& cfg, const Dataset& source_train,
                            const Dataset& target_train, const Dataset& target_val);

// Deterministic JSON-lines record for one step.
std::string format_log_line(std::int64_t step, double lr, const LossReport& report);

// Pseudo-labels straight from logits; matches pseudo_labels() on the softmax.
LabelMap pseudo_labels_from_logits(const Tensor& logits, int sample, double confidence);

// Checkpoint writer for the full run state (student, teacher, discriminators).
void save_run_checkpoint(const std::filesystem::path& path, const RunState& state);

}  // namespace eventfly
