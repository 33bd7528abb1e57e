#pragma once

#include <span>

#include "eventfly/tensor.hpp"
#include "eventfly/types.hpp"

namespace eventfly {

// Logistic outputs are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

struct LossWeights {
    double lambda = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
};

struct LossParts {
    double ce_src = 0.0;
    double ce_blend = 0.0;
    double eap_entropy = 0.0;  // raw entropy, weighted by lambda in the total
    double d1 = 0.0;
    double d2 = 0.0;
    double adv = 0.0;
};

struct LossReport {
    double ce_src = 0.0;
    double ce_blend = 0.0;
    double eap_entropy = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double adv = 0.0;
    double total = 0.0;  // ce_src + ce_blend + lambda * eap_entropy + adv
    double lambda = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
};

// Combines the parts; throws TrainAbort naming the first non-finite term.
LossReport total_objective(const LossParts& parts, const LossWeights& weights);

// Mean negative log-likelihood over non-ignored pixels. Ignored-only input
// yields 0 and sets *all_ignored. If d_logits is given, grad_scale * dCE is
// accumulated into it. Throws DomainError for labels >= classes (except 255).
double cross_entropy(const Tensor& logits, std::span<const LabelMap> labels,
                     Tensor* d_logits = nullptr, double grad_scale = 1.0,
                     bool* all_ignored = nullptr);

// Mean softmax entropy (nats) over the region pixels of every sample.
double entropy_region(const Tensor& logits, const RegionMask& region, Tensor* d_logits = nullptr,
                      double grad_scale = 1.0, bool* region_empty = nullptr);

// Same, with an independent pixel mask per sample.
double entropy_masked(const Tensor& logits, std::span<const std::vector<std::uint8_t>> masks,
                      Tensor* d_logits = nullptr, double grad_scale = 1.0,
                      bool* region_empty = nullptr);

// lambda * empirical_entropy(probs, region); analysis-path counterpart of
// entropy_region, computed in double from an explicit probability map.
double eap_loss(const ProbMap& probs, const RegionMask& region, double lambda,
                bool* region_empty = nullptr);

// Per-pixel binary cross-entropy over a (real -> 1, fake -> 0) map pair,
// summed and divided by the total pixel count of both maps.
double disc_pair_loss(const Tensor& p_real, const Tensor& p_fake, Tensor* d_real = nullptr,
                      Tensor* d_fake = nullptr, double grad_scale = 1.0);

// Source/blended discriminator objective: source maps to 1, blended to 0.
double d1_loss(const Tensor& p_src, const Tensor& p_blend, Tensor* d_src = nullptr,
               Tensor* d_blend = nullptr, double grad_scale = 1.0);

// Blended/target discriminator objective: target maps to 1, blended to 0.
double d2_loss(const Tensor& p_blend, const Tensor& p_tgt, Tensor* d_blend = nullptr,
               Tensor* d_tgt = nullptr, double grad_scale = 1.0);

// phi1 * mean(-log p1) + phi2 * mean(-log p2) over the blended features.
double adv_loss(const Tensor& p1_on_blend, const Tensor& p2_on_blend, double phi1, double phi2,
                Tensor* d_p1 = nullptr, Tensor* d_p2 = nullptr);

}  // namespace eventfly
