#include "eventfly/losses.hpp"

#include <cmath>

#include "eventfly/eap.hpp"
#include "eventfly/fastmath.hpp"

namespace eventfly {

namespace {

void check_finite(double v, const char* term) {
    if (!std::isfinite(v))
        throw TrainAbort(std::string("non-finite loss term \"") + term + "\"");
}

// -log of a clamped probability and the derivative w.r.t. the raw value.
inline double safe_neg_log(double p, double& dp) {
    if (p < kProbClamp) {
        dp = 0.0;
        return -std::log(kProbClamp);
    }
    if (p > 1.0 - kProbClamp) {
        dp = 0.0;
        return -std::log(1.0 - kProbClamp);
    }
    dp = -1.0 / p;
    return -std::log(p);
}

// Scratch for one row of pixels: the class-stride layout is walked once per
// class so every inner loop runs over contiguous memory.
struct RowScratch {
    std::vector<float> rowmax, rowsum, rinv, exps;

    void prepare(const float* z, int classes, std::size_t plane, std::size_t row_off, int w) {
        rowmax.resize(w);
        rowsum.resize(w);
        rinv.resize(w);
        exps.resize(static_cast<std::size_t>(classes) * w);
        const float* z0 = z + row_off;
        for (int x = 0; x < w; ++x) rowmax[x] = z0[x];
        for (int c = 1; c < classes; ++c) {
            const float* zc = z + c * plane + row_off;
            for (int x = 0; x < w; ++x) rowmax[x] = std::max(rowmax[x], zc[x]);
        }
        for (int x = 0; x < w; ++x) rowsum[x] = 0.0f;
        for (int c = 0; c < classes; ++c) {
            const float* zc = z + c * plane + row_off;
            float* e = exps.data() + static_cast<std::size_t>(c) * w;
            fast_exp_sub_row(zc, rowmax.data(), e, w);
            for (int x = 0; x < w; ++x) rowsum[x] += e[x];
        }
        for (int x = 0; x < w; ++x) rinv[x] = 1.0f / rowsum[x];
    }
};

}  // namespace

LossReport total_objective(const LossParts& parts, const LossWeights& weights) {
    check_finite(parts.ce_src, "ce_src");
    check_finite(parts.ce_blend, "ce_blend");
    check_finite(parts.eap_entropy, "eap_entropy");
    check_finite(parts.d1, "d1");
    check_finite(parts.d2, "d2");
    check_finite(parts.adv, "adv");
    LossReport r;
    r.ce_src = parts.ce_src;
    r.ce_blend = parts.ce_blend;
    r.eap_entropy = parts.eap_entropy;
    r.d1 = parts.d1;
    r.d2 = parts.d2;
    r.adv = parts.adv;
    r.lambda = weights.lambda;
    r.phi1 = weights.phi1;
    r.phi2 = weights.phi2;
    r.total = parts.ce_src + parts.ce_blend + weights.lambda * parts.eap_entropy + parts.adv;
    check_finite(r.total, "total");
    return r;
}

double cross_entropy(const Tensor& logits, std::span<const LabelMap> labels, Tensor* d_logits,
                     double grad_scale, bool* all_ignored) {
    if (static_cast<std::size_t>(logits.n) != labels.size())
        throw ShapeError("cross entropy: batch size and label count disagree");
    const int classes = logits.c;
    const int w = logits.w;
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;

    std::size_t valid = 0;
    for (int i = 0; i < logits.n; ++i) {
        const LabelMap& lm = labels[i];
        if (lm.height != logits.h || lm.width != logits.w)
            throw ShapeError("cross entropy: label dims do not match logits");
        for (std::size_t px = 0; px < plane; ++px) {
            const std::uint8_t y = lm.data[px];
            if (y == LabelMap::kIgnore) continue;
            if (y >= classes)
                throw DomainError("label " + std::to_string(y) + " out of range for " +
                                  std::to_string(classes) + " classes");
            ++valid;
        }
    }
    if (all_ignored) *all_ignored = (valid == 0);
    if (valid == 0) return 0.0;

    const double inv = 1.0 / static_cast<double>(valid);
    const float gscale = static_cast<float>(grad_scale * inv);
    double total = 0.0;
    RowScratch rs;
    std::vector<float> mask(w);
    for (int i = 0; i < logits.n; ++i) {
        const float* z = logits.sample(i);
        float* dz = d_logits ? d_logits->sample(i) : nullptr;
        const LabelMap& lm = labels[i];
        for (int y = 0; y < logits.h; ++y) {
            const std::size_t row_off = static_cast<std::size_t>(y) * w;
            const std::uint8_t* lrow = lm.data.data() + row_off;
            bool any = false;
            for (int x = 0; x < w; ++x) {
                const bool use = lrow[x] != LabelMap::kIgnore;
                mask[x] = use ? gscale : 0.0f;
                any |= use;
            }
            if (!any) continue;
            rs.prepare(z, classes, plane, row_off, w);
            for (int x = 0; x < w; ++x) {
                if (lrow[x] == LabelMap::kIgnore) continue;
                const float zy = z[lrow[x] * plane + row_off + x];
                total += static_cast<double>(fast_log(rs.rowsum[x])) -
                         static_cast<double>(zy - rs.rowmax[x]);
            }
            if (dz) {
                for (int c = 0; c < classes; ++c) {
                    float* drow = dz + c * plane + row_off;
                    const float* e = rs.exps.data() + static_cast<std::size_t>(c) * w;
                    for (int x = 0; x < w; ++x) drow[x] += mask[x] * e[x] * rs.rinv[x];
                }
                for (int x = 0; x < w; ++x)
                    if (lrow[x] != LabelMap::kIgnore) dz[lrow[x] * plane + row_off + x] -= gscale;
            }
        }
    }
    return total * inv;
}

namespace {

// Shared entropy kernel; mask_for(i) returns the per-sample pixel mask.
template <typename MaskFor>
double entropy_impl(const Tensor& logits, MaskFor mask_for, Tensor* d_logits, double grad_scale,
                    bool* region_empty) {
    const int classes = logits.c;
    const int w = logits.w;
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;

    std::size_t active = 0;
    for (int i = 0; i < logits.n; ++i) {
        const std::uint8_t* mask = mask_for(i);
        for (std::size_t px = 0; px < plane; ++px) active += mask[px] ? 1 : 0;
    }
    if (region_empty) *region_empty = (active == 0);
    if (active == 0) return 0.0;

    const double inv = 1.0 / static_cast<double>(active);
    const float gscale = static_cast<float>(grad_scale * inv);
    double total = 0.0;
    RowScratch rs;
    std::vector<float> dot(w), gmask(w);
    for (int i = 0; i < logits.n; ++i) {
        const float* z = logits.sample(i);
        float* dz = d_logits ? d_logits->sample(i) : nullptr;
        const std::uint8_t* mask = mask_for(i);
        for (int y = 0; y < logits.h; ++y) {
            const std::size_t row_off = static_cast<std::size_t>(y) * w;
            const std::uint8_t* mrow = mask + row_off;
            bool any = false;
            for (int x = 0; x < w; ++x) any |= (mrow[x] != 0);
            if (!any) continue;
            rs.prepare(z, classes, plane, row_off, w);
            for (int x = 0; x < w; ++x) dot[x] = 0.0f;
            for (int c = 0; c < classes; ++c) {
                const float* zc = z + c * plane + row_off;
                const float* e = rs.exps.data() + static_cast<std::size_t>(c) * w;
                for (int x = 0; x < w; ++x)
                    dot[x] += e[x] * rs.rinv[x] * (zc[x] - rs.rowmax[x]);
            }
            for (int x = 0; x < w; ++x) {
                if (!mrow[x]) continue;
                total += static_cast<double>(fast_log(rs.rowsum[x])) - static_cast<double>(dot[x]);
            }
            if (dz) {
                for (int x = 0; x < w; ++x) gmask[x] = mrow[x] ? gscale : 0.0f;
                for (int c = 0; c < classes; ++c) {
                    const float* zc = z + c * plane + row_off;
                    const float* e = rs.exps.data() + static_cast<std::size_t>(c) * w;
                    float* drow = dz + c * plane + row_off;
                    for (int x = 0; x < w; ++x)
                        drow[x] -= gmask[x] * e[x] * rs.rinv[x] * (zc[x] - rs.rowmax[x] - dot[x]);
                }
            }
        }
    }
    return total * inv;
}

}  // namespace

double entropy_region(const Tensor& logits, const RegionMask& region, Tensor* d_logits,
                      double grad_scale, bool* region_empty) {
    if (region.height != logits.h || region.width != logits.w)
        throw ShapeError("entropy: region dims do not match logits");
    const std::uint8_t* bits = region.bits.data();
    return entropy_impl(
        logits, [bits](int) { return bits; }, d_logits, grad_scale, region_empty);
}

double entropy_masked(const Tensor& logits, std::span<const std::vector<std::uint8_t>> masks,
                      Tensor* d_logits, double grad_scale, bool* region_empty) {
    if (masks.size() != static_cast<std::size_t>(logits.n))
        throw ShapeError("entropy: need one pixel mask per sample");
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    for (const auto& m : masks)
        if (m.size() != plane) throw ShapeError("entropy: pixel mask size mismatch");
    return entropy_impl(
        logits, [&masks](int i) { return masks[i].data(); }, d_logits, grad_scale, region_empty);
}

double eap_loss(const ProbMap& probs, const RegionMask& region, double lambda,
                bool* region_empty) {
    const EntropyResult r = empirical_entropy(probs, region);
    if (region_empty) *region_empty = r.region_empty;
    return lambda * r.nats;
}

double disc_pair_loss(const Tensor& p_real, const Tensor& p_fake, Tensor* d_real, Tensor* d_fake,
                      double grad_scale) {
    const std::size_t count = p_real.size() + p_fake.size();
    if (count == 0) throw ShapeError("discriminator loss over empty maps");
    const double inv = grad_scale / static_cast<double>(count);
    double total = 0.0;
    for (std::size_t i = 0; i < p_real.v.size(); ++i) {
        double dp;
        total += safe_neg_log(p_real.v[i], dp);
        if (d_real) d_real->v[i] += static_cast<float>(inv * dp);
    }
    for (std::size_t i = 0; i < p_fake.v.size(); ++i) {
        double dp;
        total += safe_neg_log(1.0 - static_cast<double>(p_fake.v[i]), dp);
        if (d_fake) d_fake->v[i] += static_cast<float>(-inv * dp);
    }
    return total / static_cast<double>(count);
}

double d1_loss(const Tensor& p_src, const Tensor& p_blend, Tensor* d_src, Tensor* d_blend,
               double grad_scale) {
    return disc_pair_loss(p_src, p_blend, d_src, d_blend, grad_scale);
}

double d2_loss(const Tensor& p_blend, const Tensor& p_tgt, Tensor* d_blend, Tensor* d_tgt,
               double grad_scale) {
    return disc_pair_loss(p_tgt, p_blend, d_tgt, d_blend, grad_scale);
}

double adv_loss(const Tensor& p1_on_blend, const Tensor& p2_on_blend, double phi1, double phi2,
                Tensor* d_p1, Tensor* d_p2) {
    double sum1 = 0.0;
    const double inv1 = p1_on_blend.size() ? 1.0 / static_cast<double>(p1_on_blend.size()) : 0.0;
    for (std::size_t i = 0; i < p1_on_blend.v.size(); ++i) {
        double dp;
        sum1 += safe_neg_log(p1_on_blend.v[i], dp);
        if (d_p1) d_p1->v[i] += static_cast<float>(phi1 * inv1 * dp);
    }
    double sum2 = 0.0;
    const double inv2 = p2_on_blend.size() ? 1.0 / static_cast<double>(p2_on_blend.size()) : 0.0;
    for (std::size_t i = 0; i < p2_on_blend.v.size(); ++i) {
        double dp;
        sum2 += safe_neg_log(p2_on_blend.v[i], dp);
        if (d_p2) d_p2->v[i] += static_cast<float>(phi2 * inv2 * dp);
    }
    return phi1 * sum1 * inv1 + phi2 * sum2 * inv2;
}

}  // namespace eventfly
