#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>

#include "eventfly/rng.hpp"
#include "eventfly/tensor.hpp"

namespace eventfly {

enum class FeatureTap { kHead, kEncoder };

struct SegNetConfig {
    int in_bins = 20;      // input channels (temporal bins)
    int classes = 11;
    int enc1 = 6;          // channels after the first stride-2 conv
    int enc2 = 10;
    int feature = 14;      // channels of the adversarial feature map
    FeatureTap tap = FeatureTap::kHead;

    bool operator==(const SegNetConfig&) const = default;
};

// Encoder of three stride-2 3x3 convs, two-conv feature head at 1/8
// resolution, and a zero-initialized 1x1 classifier whose logits are
// bilinearly upsampled back to the input size. Leaky-ReLU slope 0.1.
struct SegNet {
    SegNetConfig cfg;
    ParamSet params;

    void build(const SegNetConfig& config);
    void init(Rng& rng);  // He-uniform convs, zero classifier
};

// Activation cache for one forward pass; required by the matching backward.
struct SegForward {
    bool valid = false;
    Tensor input;
    Tensor a1, a2, a3;       // post leaky-ReLU encoder activations
    Tensor h1, h2;           // feature-head activations (h2 is the head tap)
    Tensor logits_lo;        // classifier output at 1/8 resolution
    Tensor logits;           // upsampled to input resolution
};

// Runs the network; `cache` buffers are reused across calls of equal shapes.
// Inference-only callers may skip the input copy (backward then unavailable).
void seg_forward(const SegNet& net, const Tensor& input, SegForward& cache, Workspace& ws,
                 bool keep_input = true);

// Softmax over the class axis; rows sum to 1 within 1e-5.
void softmax_channels(const Tensor& logits, Tensor& probs);

// View of one sample's probabilities as a ProbMap.
ProbMap probs_to_map(const Tensor& probs, int sample);

const Tensor& feature_of(const SegNet& net, const SegForward& cache);

// Accumulates parameter gradients for one cached forward. d_logits is the
// gradient at full-resolution logits, d_feature the gradient arriving at the
// adversarial feature tap; either may be null. Throws StateError if the cache
// does not hold a forward pass.
void seg_backward(SegNet& net, SegForward& cache, const Tensor* d_logits,
                  const Tensor* d_feature, Workspace& ws);

struct DiscriminatorConfig {
    int in_channels = 14;
    int hidden = 10;

    bool operator==(const DiscriminatorConfig&) const = default;
};

// Three 3x3 convs ending in one channel, logistic output per pixel.
struct Discriminator {
    DiscriminatorConfig cfg;
    ParamSet params;

    void build(const DiscriminatorConfig& config);
    void init(Rng& rng);
};

struct DiscForward {
    bool valid = false;
    Tensor input;
    Tensor a1, a2;
    Tensor prob;  // sigmoid output, strictly inside (0,1)
};

void disc_forward(const Discriminator& disc, const Tensor& feature, DiscForward& cache,
                  Workspace& ws);

// d_prob is the gradient at the probability map. Parameter gradients are
// accumulated only when train_params is set; d_input may be null.
void disc_backward(Discriminator& disc, DiscForward& cache, const Tensor& d_prob,
                   Tensor* d_input, bool train_params, Workspace& ws);

// teacher <- momentum * teacher + (1 - momentum) * student, elementwise.
void ema_update(SegNet& teacher, const SegNet& student, double momentum);

struct EmaTeacher {
    SegNet net;
    double momentum = 0.999;

    void update(const SegNet& student) { ema_update(net, student, momentum); }
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// One decoupled-decay update over every parameter in the set, using the
// gradients and moments stored alongside the values.
void adamw_step(ParamSet& params, std::int64_t step, double lr, const AdamWConfig& cfg);

class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}
    void step(ParamSet& params, double lr) { adamw_step(params, ++count_, lr, cfg_); }
    std::int64_t count() const { return count_; }

private:
    AdamWConfig cfg_;
    std::int64_t count_ = 0;
};

// Linear warmup from lr_max/25 to lr_max over the first 30% of steps, then
// cosine decay back to lr_max/25.
double onecycle_lr(std::int64_t step, std::int64_t total, double lr_max);

// Bilinear resize (half-pixel centers); `out` carries the requested dims.
void bilinear_resize(const Tensor& in, Tensor& out);
void bilinear_resize_backward(const Tensor& d_out, Tensor& d_in);

// Checkpoint file: magic "EFK1", config digest (u64), step (i64), then named
// float32 parameter blocks.
struct Checkpoint {
    std::uint64_t config_digest = 0;
    std::int64_t step = 0;
    std::map<std::string, Param> blocks;
};

void save_checkpoint(const std::filesystem::path& path, std::uint64_t config_digest,
                     std::int64_t step,
                     std::span<const std::pair<std::string, const ParamSet*>> sets);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void apply_checkpoint(const Checkpoint& ckpt, const std::string& prefix, ParamSet& params);

}  // namespace eventfly
