#include "eventfly/net.hpp"

#include <cmath>
#include <cstring>

#include "binio.hpp"
#include "eventfly/fastmath.hpp"
#include "simd.hpp"

namespace eventfly {

namespace {

constexpr float kLeakySlope = 0.1f;

struct ConvDims {
    int ic, oc, k, stride, pad;
    int ih, iw, oh, ow;
    int patch() const { return ic * k * k; }
    std::size_t out_plane() const { return static_cast<std::size_t>(oh) * ow; }
};

ConvDims make_dims(const Tensor& x, const Param& w, int stride) {
    ConvDims d;
    d.oc = w.shape[0];
    d.ic = w.shape[1];
    d.k = w.shape[2];
    d.stride = stride;
    d.pad = d.k / 2;
    d.ih = x.h;
    d.iw = x.w;
    d.oh = (x.h + 2 * d.pad - d.k) / stride + 1;
    d.ow = (x.w + 2 * d.pad - d.k) / stride + 1;
    if (x.c != d.ic)
        throw ShapeError("conv expects " + std::to_string(d.ic) + " input channels, got " +
                         std::to_string(x.c));
    return d;
}

void im2col(const float* x, const ConvDims& d, float* col) {
    const std::size_t n = d.out_plane();
    for (int c = 0; c < d.ic; ++c) {
        const float* xc = x + static_cast<std::size_t>(c) * d.ih * d.iw;
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                float* row = col + ((static_cast<std::size_t>(c) * d.k + ky) * d.k + kx) * n;
                std::size_t o = 0;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.ih) {
                        for (int ox = 0; ox < d.ow; ++ox) row[o++] = 0.0f;
                        continue;
                    }
                    const float* xrow = xc + static_cast<std::size_t>(iy) * d.iw;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        const int ix = ox * d.stride - d.pad + kx;
                        row[o++] = (ix < 0 || ix >= d.iw) ? 0.0f : xrow[ix];
                    }
                }
            }
        }
    }
}

void col2im_acc(const float* col, const ConvDims& d, float* dx) {
    const std::size_t n = d.out_plane();
    for (int c = 0; c < d.ic; ++c) {
        float* xc = dx + static_cast<std::size_t>(c) * d.ih * d.iw;
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                const float* row = col + ((static_cast<std::size_t>(c) * d.k + ky) * d.k + kx) * n;
                std::size_t o = 0;
                for (int oy = 0; oy < d.oh; ++oy) {
                    const int iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.ih) {
                        o += d.ow;
                        continue;
                    }
                    float* xrow = xc + static_cast<std::size_t>(iy) * d.iw;
                    for (int ox = 0; ox < d.ow; ++ox) {
                        const int ix = ox * d.stride - d.pad + kx;
                        if (ix >= 0 && ix < d.iw) xrow[ix] += row[o];
                        ++o;
                    }
                }
            }
        }
    }
}

// Stride-2 3x3 convolutions run directly on even/odd column planes: every
// kernel tap is then a unit-stride row operation and no patch matrix is
// materialized. Output rows stay cache-resident while each input row is
// shared across all output channels.
void conv_s2_forward(const EvenOddPlanes& eo, const Param& w, const Param& b, int oc_count,
                     float* y, int oh, int ow) {
    const int ic = eo.ch;
    for (int oc = 0; oc < oc_count; ++oc) {
        float* plane = y + static_cast<std::size_t>(oc) * oh * ow;
        const float bias = b.value[oc];
        for (std::size_t j = 0; j < static_cast<std::size_t>(oh) * ow; ++j) plane[j] = bias;
    }
    for (int c = 0; c < ic; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int oy = 0; oy < oh; ++oy) {
                const int iy = 2 * oy - 1 + ky;
                if (iy < 0 || iy >= eo.h) continue;
                const float* erow = eo.even_row(c, iy);
                const float* orow = eo.odd_row(c, iy);
                for (int oc = 0; oc < oc_count; ++oc) {
                    const float* wk =
                        w.value.data() + (static_cast<std::size_t>(oc) * ic + c) * 9 + 3 * ky;
                    float* yrow = y + (static_cast<std::size_t>(oc) * oh + oy) * ow;
                    const float w0 = wk[0], w1 = wk[1], w2 = wk[2];
                    yrow[0] += w1 * erow[0] + w2 * orow[0];
                    for (int x = 1; x < ow; ++x)
                        yrow[x] += w0 * orow[x - 1] + w1 * erow[x] + w2 * orow[x];
                }
            }
        }
    }
}

void conv_s2_dw(const EvenOddPlanes& eo, Param& w, Param& b, const float* dy, int oc_count,
                int oh, int ow) {
    const int ic = eo.ch;
    for (int oc = 0; oc < oc_count; ++oc) {
        const float* plane = dy + static_cast<std::size_t>(oc) * oh * ow;
        float acc = 0.0f;
        for (std::size_t j = 0; j < static_cast<std::size_t>(oh) * ow; ++j) acc += plane[j];
        b.grad[oc] += acc;
    }
    std::vector<float> acc(static_cast<std::size_t>(oc_count) * 3);
    for (int c = 0; c < ic; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            std::fill(acc.begin(), acc.end(), 0.0f);
            for (int oy = 0; oy < oh; ++oy) {
                const int iy = 2 * oy - 1 + ky;
                if (iy < 0 || iy >= eo.h) continue;
                const float* erow = eo.even_row(c, iy);
                const float* orow = eo.odd_row(c, iy);
                for (int oc = 0; oc < oc_count; ++oc) {
                    const float* drow = dy + (static_cast<std::size_t>(oc) * oh + oy) * ow;
                    float s0, s1, s2;
#if defined(EVENTFLY_V8F)
                    {
                        using detail::v8f;
                        v8f a0 = {}, a1 = {}, a2 = {};
                        int x = 1;
                        for (; x + 8 <= ow; x += 8) {
                            const v8f dv = detail::load8(drow + x);
                            a0 += dv * detail::load8(orow + x - 1);
                            a1 += dv * detail::load8(erow + x);
                            a2 += dv * detail::load8(orow + x);
                        }
                        s0 = detail::hsum8(a0);
                        s1 = detail::hsum8(a1);
                        s2 = detail::hsum8(a2);
                        for (; x < ow; ++x) {
                            s0 += drow[x] * orow[x - 1];
                            s1 += drow[x] * erow[x];
                            s2 += drow[x] * orow[x];
                        }
                        s1 += drow[0] * erow[0];
                        s2 += drow[0] * orow[0];
                    }
#else
                    s0 = s1 = s2 = 0.0f;
                    for (int x = 1; x < ow; ++x) s0 += drow[x] * orow[x - 1];
                    for (int x = 0; x < ow; ++x) s1 += drow[x] * erow[x];
                    for (int x = 0; x < ow; ++x) s2 += drow[x] * orow[x];
#endif
                    acc[oc * 3 + 0] += s0;
                    acc[oc * 3 + 1] += s1;
                    acc[oc * 3 + 2] += s2;
                }
            }
            for (int oc = 0; oc < oc_count; ++oc) {
                float* wk = w.grad.data() + (static_cast<std::size_t>(oc) * ic + c) * 9 + 3 * ky;
                wk[0] += acc[oc * 3 + 0];
                wk[1] += acc[oc * 3 + 1];
                wk[2] += acc[oc * 3 + 2];
            }
        }
    }
}

void conv_forward(const Tensor& x, const Param& w, const Param& b, int stride, Tensor& y,
                  Workspace& ws) {
    const ConvDims d = make_dims(x, w, stride);
    y.resize(x.n, d.oc, d.oh, d.ow);
    const std::size_t n = d.out_plane();
    if (stride == 2 && d.k == 3 && d.iw % 2 == 0) {
        for (int i = 0; i < x.n; ++i) {
            ws.even_odd.split(x.sample(i), d.ic, d.ih, d.iw);
            conv_s2_forward(ws.even_odd, w, b, d.oc, y.sample(i), d.oh, d.ow);
        }
        return;
    }
    const bool direct = (d.k == 1 && stride == 1);
    if (!direct) ws.col.resize(static_cast<std::size_t>(d.patch()) * n);
    for (int i = 0; i < x.n; ++i) {
        const float* col = ws.col.data();
        if (direct) {
            col = x.sample(i);
        } else {
            im2col(x.sample(i), d, ws.col.data());
        }
        float* out = y.sample(i);
        gemm(w.value.data(), col, out, d.oc, d.patch(), static_cast<int>(n), false);
        for (int oc = 0; oc < d.oc; ++oc) {
            const float bias = b.value[oc];
            float* row = out + static_cast<std::size_t>(oc) * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += bias;
        }
    }
}

void conv_backward(const Tensor& x, Param& w, Param& b, int stride, const Tensor& dy, Tensor* dx,
                   bool train_params, Workspace& ws) {
    const ConvDims d = make_dims(x, w, stride);
    const std::size_t n = d.out_plane();
    const bool direct = (d.k == 1 && stride == 1);
    const bool s2 = (stride == 2 && d.k == 3 && d.iw % 2 == 0);
    if (!direct && !s2) ws.col.resize(static_cast<std::size_t>(d.patch()) * n);
    if (dx) {
        dx->resize(x.n, x.c, x.h, x.w);
        if (!direct) ws.dcol.resize(static_cast<std::size_t>(d.patch()) * n);
    }
    for (int i = 0; i < x.n; ++i) {
        const float* dout = dy.sample(i);
        if (train_params && s2) {
            ws.even_odd.split(x.sample(i), d.ic, d.ih, d.iw);
            conv_s2_dw(ws.even_odd, w, b, dout, d.oc, d.oh, d.ow);
        } else if (train_params) {
            const float* col = direct ? x.sample(i) : ws.col.data();
            if (!direct) im2col(x.sample(i), d, ws.col.data());
            gemm_a_bt_acc(dout, col, w.grad.data(), d.oc, static_cast<int>(n), d.patch());
            for (int oc = 0; oc < d.oc; ++oc) {
                const float* row = dout + static_cast<std::size_t>(oc) * n;
                float acc = 0.0f;
                for (std::size_t j = 0; j < n; ++j) acc += row[j];
                b.grad[oc] += acc;
            }
        }
        if (dx) {
            if (direct) {
                gemm_at_b(w.value.data(), dout, dx->sample(i), d.oc, d.patch(), static_cast<int>(n));
            } else {
                gemm_at_b(w.value.data(), dout, ws.dcol.data(), d.oc, d.patch(),
                          static_cast<int>(n));
                std::memset(dx->sample(i), 0, dx->sample_size() * sizeof(float));
                col2im_acc(ws.dcol.data(), d, dx->sample(i));
            }
        }
    }
}

void leaky_inplace(Tensor& t) {
    for (float& v : t.v) v = v > 0.0f ? v : kLeakySlope * v;
}

// act holds the post-activation values of the same layer.
void leaky_backward_inplace(const Tensor& act, Tensor& grad) {
    for (std::size_t i = 0; i < grad.v.size(); ++i)
        grad.v[i] *= act.v[i] > 0.0f ? 1.0f : kLeakySlope;
}

void he_uniform(Param& p, int fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : p.value) v = static_cast<float>(rng.uniform(-limit, limit));
}

void add_into(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src)) throw ShapeError("gradient shapes disagree");
    for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

struct ResizeAxis {
    std::vector<int> lo, hi;
    std::vector<float> frac;
};

ResizeAxis make_axis(int in, int out) {
    ResizeAxis a;
    a.lo.resize(out);
    a.hi.resize(out);
    a.frac.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double c = (o + 0.5) * scale - 0.5;
        if (c < 0.0) c = 0.0;
        if (c > in - 1) c = in - 1;
        const int lo = static_cast<int>(c);
        a.lo[o] = lo;
        a.hi[o] = lo + 1 < in ? lo + 1 : lo;
        a.frac[o] = static_cast<float>(c - lo);
    }
    return a;
}

}  // namespace

void SegNet::build(const SegNetConfig& config) {
    cfg = config;
    params = ParamSet{};
    params.add("conv1.w", {cfg.enc1, cfg.in_bins, 3, 3});
    params.add("conv1.b", {cfg.enc1});
    params.add("conv2.w", {cfg.enc2, cfg.enc1, 3, 3});
    params.add("conv2.b", {cfg.enc2});
    params.add("conv3.w", {cfg.feature, cfg.enc2, 3, 3});
    params.add("conv3.b", {cfg.feature});
    params.add("head1.w", {cfg.feature, cfg.feature, 3, 3});
    params.add("head1.b", {cfg.feature});
    params.add("head2.w", {cfg.feature, cfg.feature, 3, 3});
    params.add("head2.b", {cfg.feature});
    params.add("cls.w", {cfg.classes, cfg.feature, 1, 1});
    params.add("cls.b", {cfg.classes});
}

void SegNet::init(Rng& rng) {
    for (Param& p : params.params) {
        if (p.name == "cls.w" || p.name == "cls.b" || p.shape.size() == 1) {
            std::fill(p.value.begin(), p.value.end(), 0.0f);  // zero classifier and biases
        } else {
            he_uniform(p, p.shape[1] * p.shape[2] * p.shape[3], rng);
        }
    }
}

void seg_forward(const SegNet& net, const Tensor& input, SegForward& cache, Workspace& ws,
                 bool keep_input) {
    if (input.c != net.cfg.in_bins)
        throw ShapeError("segmentation input expects " + std::to_string(net.cfg.in_bins) +
                         " channels, got " + std::to_string(input.c));
    ParamSet& p = const_cast<ParamSet&>(net.params);
    if (keep_input) {
        cache.input = input;
    } else {
        cache.input.resize(0, 0, 0, 0);
    }
    conv_forward(input, p.find("conv1.w"), p.find("conv1.b"), 2, cache.a1, ws);
    leaky_inplace(cache.a1);
    conv_forward(cache.a1, p.find("conv2.w"), p.find("conv2.b"), 2, cache.a2, ws);
    leaky_inplace(cache.a2);
    conv_forward(cache.a2, p.find("conv3.w"), p.find("conv3.b"), 2, cache.a3, ws);
    leaky_inplace(cache.a3);
    conv_forward(cache.a3, p.find("head1.w"), p.find("head1.b"), 1, cache.h1, ws);
    leaky_inplace(cache.h1);
    conv_forward(cache.h1, p.find("head2.w"), p.find("head2.b"), 1, cache.h2, ws);
    leaky_inplace(cache.h2);
    conv_forward(cache.h2, p.find("cls.w"), p.find("cls.b"), 1, cache.logits_lo, ws);
    cache.logits.resize(input.n, net.cfg.classes, input.h, input.w);
    bilinear_resize(cache.logits_lo, cache.logits);
    cache.valid = true;
}

void softmax_channels(const Tensor& logits, Tensor& probs) {
    probs.resize(logits.n, logits.c, logits.h, logits.w);
    const int w = logits.w;
    const std::size_t plane = static_cast<std::size_t>(logits.h) * logits.w;
    std::vector<float> rowmax(w), rowsum(w);
    for (int i = 0; i < logits.n; ++i) {
        const float* z = logits.sample(i);
        float* out = probs.sample(i);
        for (int y = 0; y < logits.h; ++y) {
            const std::size_t off = static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) rowmax[x] = z[off + x];
            for (int c = 1; c < logits.c; ++c) {
                const float* zc = z + c * plane + off;
                for (int x = 0; x < w; ++x) rowmax[x] = std::max(rowmax[x], zc[x]);
            }
            for (int x = 0; x < w; ++x) rowsum[x] = 0.0f;
            for (int c = 0; c < logits.c; ++c) {
                const float* zc = z + c * plane + off;
                float* oc = out + c * plane + off;
                fast_exp_sub_row(zc, rowmax.data(), oc, w);
                for (int x = 0; x < w; ++x) rowsum[x] += oc[x];
            }
            for (int x = 0; x < w; ++x) rowsum[x] = 1.0f / rowsum[x];
            for (int c = 0; c < logits.c; ++c) {
                float* oc = out + c * plane + off;
                for (int x = 0; x < w; ++x) oc[x] *= rowsum[x];
            }
        }
    }
}

ProbMap probs_to_map(const Tensor& probs, int sample) {
    ProbMap m(probs.c, probs.h, probs.w);
    const float* src = probs.sample(sample);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = src[i];
    return m;
}

const Tensor& feature_of(const SegNet& net, const SegForward& cache) {
    if (!cache.valid) throw StateError("feature requested before forward");
    return net.cfg.tap == FeatureTap::kHead ? cache.h2 : cache.a3;
}

void seg_backward(SegNet& net, SegForward& cache, const Tensor* d_logits, const Tensor* d_feature,
                  Workspace& ws) {
    if (!cache.valid) throw StateError("backward before forward");
    if (cache.input.size() == 0) throw StateError("backward through an inference-only forward");
    ParamSet& p = net.params;
    const bool head_tap = net.cfg.tap == FeatureTap::kHead;

    Tensor g_h2(cache.h2.n, cache.h2.c, cache.h2.h, cache.h2.w);
    if (d_logits) {
        Tensor g_lo;
        g_lo.resize(cache.logits_lo.n, cache.logits_lo.c, cache.logits_lo.h, cache.logits_lo.w);
        bilinear_resize_backward(*d_logits, g_lo);
        conv_backward(cache.h2, p.find("cls.w"), p.find("cls.b"), 1, g_lo, &g_h2, true, ws);
    }
    if (d_feature && head_tap) add_into(g_h2, *d_feature);

    leaky_backward_inplace(cache.h2, g_h2);
    Tensor g_h1;
    conv_backward(cache.h1, p.find("head2.w"), p.find("head2.b"), 1, g_h2, &g_h1, true, ws);
    leaky_backward_inplace(cache.h1, g_h1);
    Tensor g_a3;
    conv_backward(cache.a3, p.find("head1.w"), p.find("head1.b"), 1, g_h1, &g_a3, true, ws);
    if (d_feature && !head_tap) add_into(g_a3, *d_feature);

    leaky_backward_inplace(cache.a3, g_a3);
    Tensor g_a2;
    conv_backward(cache.a2, p.find("conv3.w"), p.find("conv3.b"), 2, g_a3, &g_a2, true, ws);
    leaky_backward_inplace(cache.a2, g_a2);
    Tensor g_a1;
    conv_backward(cache.a1, p.find("conv2.w"), p.find("conv2.b"), 2, g_a2, &g_a1, true, ws);
    leaky_backward_inplace(cache.a1, g_a1);
    conv_backward(cache.input, p.find("conv1.w"), p.find("conv1.b"), 2, g_a1, nullptr, true, ws);
}

void Discriminator::build(const DiscriminatorConfig& config) {
    cfg = config;
    params = ParamSet{};
    params.add("conv1.w", {cfg.hidden, cfg.in_channels, 3, 3});
    params.add("conv1.b", {cfg.hidden});
    params.add("conv2.w", {cfg.hidden, cfg.hidden, 3, 3});
    params.add("conv2.b", {cfg.hidden});
    params.add("conv3.w", {1, cfg.hidden, 3, 3});
    params.add("conv3.b", {1});
}

void Discriminator::init(Rng& rng) {
    for (Param& p : params.params) {
        if (p.shape.size() == 1) {
            std::fill(p.value.begin(), p.value.end(), 0.0f);
        } else {
            he_uniform(p, p.shape[1] * p.shape[2] * p.shape[3], rng);
        }
    }
}

void disc_forward(const Discriminator& disc, const Tensor& feature, DiscForward& cache,
                  Workspace& ws) {
    if (feature.c != disc.cfg.in_channels)
        throw ShapeError("discriminator expects " + std::to_string(disc.cfg.in_channels) +
                         " feature channels, got " + std::to_string(feature.c));
    ParamSet& p = const_cast<ParamSet&>(disc.params);
    cache.input = feature;
    conv_forward(cache.input, p.find("conv1.w"), p.find("conv1.b"), 1, cache.a1, ws);
    leaky_inplace(cache.a1);
    conv_forward(cache.a1, p.find("conv2.w"), p.find("conv2.b"), 1, cache.a2, ws);
    leaky_inplace(cache.a2);
    conv_forward(cache.a2, p.find("conv3.w"), p.find("conv3.b"), 1, cache.prob, ws);
    for (float& v : cache.prob.v) {
        const double z = v;
        double s;
        if (z >= 0.0) {
            s = 1.0 / (1.0 + std::exp(-z));
        } else {
            const double e = std::exp(z);
            s = e / (1.0 + e);
        }
        s = std::min(1.0 - 1e-7, std::max(1e-7, s));
        v = static_cast<float>(s);
    }
    cache.valid = true;
}

void disc_backward(Discriminator& disc, DiscForward& cache, const Tensor& d_prob, Tensor* d_input,
                   bool train_params, Workspace& ws) {
    if (!cache.valid) throw StateError("backward before forward");
    if (!d_prob.same_shape(cache.prob)) throw ShapeError("discriminator gradient shape mismatch");
    ParamSet& p = disc.params;
    Tensor g_z(cache.prob.n, cache.prob.c, cache.prob.h, cache.prob.w);
    for (std::size_t i = 0; i < g_z.v.size(); ++i) {
        const float s = cache.prob.v[i];
        g_z.v[i] = d_prob.v[i] * s * (1.0f - s);
    }
    Tensor g_a2;
    conv_backward(cache.a2, p.find("conv3.w"), p.find("conv3.b"), 1, g_z, &g_a2, train_params, ws);
    leaky_backward_inplace(cache.a2, g_a2);
    Tensor g_a1;
    conv_backward(cache.a1, p.find("conv2.w"), p.find("conv2.b"), 1, g_a2, &g_a1, train_params, ws);
    leaky_backward_inplace(cache.a1, g_a1);
    conv_backward(cache.input, p.find("conv1.w"), p.find("conv1.b"), 1, g_a1, d_input,
                  train_params, ws);
}

void ema_update(SegNet& teacher, const SegNet& student, double momentum) {
    if (!(momentum >= 0.0 && momentum <= 1.0))
        throw ConfigError("EMA momentum must be in [0,1]");
    if (teacher.params.params.size() != student.params.params.size())
        throw StateError("teacher and student parameter sets disagree");
    const float m = static_cast<float>(momentum);
    const float s = static_cast<float>(1.0 - momentum);
    for (std::size_t i = 0; i < teacher.params.params.size(); ++i) {
        Param& t = teacher.params.params[i];
        const Param& u = student.params.params[i];
        if (t.size() != u.size()) throw StateError("teacher and student shapes disagree");
        for (std::size_t j = 0; j < t.value.size(); ++j)
            t.value[j] = m * t.value[j] + s * u.value[j];
    }
}

void adamw_step(ParamSet& params, std::int64_t step, double lr, const AdamWConfig& cfg) {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (step < 1) throw StateError("optimizer step counter must start at 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (Param& p : params.params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            const double m1 = cfg.beta1 * p.m1[i] + (1.0 - cfg.beta1) * g;
            const double m2 = cfg.beta2 * p.m2[i] + (1.0 - cfg.beta2) * g * g;
            p.m1[i] = static_cast<float>(m1);
            p.m2[i] = static_cast<float>(m2);
            const double mhat = m1 / bc1;
            const double vhat = m2 / bc2;
            const double value = p.value[i];
            p.value[i] = static_cast<float>(
                value - lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * value));
        }
    }
}

double onecycle_lr(std::int64_t step, std::int64_t total, double lr_max) {
    if (lr_max <= 0.0) throw ConfigError("peak learning rate must be positive");
    if (total <= 0) throw ConfigError("schedule length must be positive");
    if (step < 0 || step > total) throw ConfigError("step outside the schedule");
    const double lr_min = lr_max / 25.0;
    const double warm = 0.3 * static_cast<double>(total);
    const double s = static_cast<double>(step);
    if (s <= warm) return lr_min + (lr_max - lr_min) * (warm > 0.0 ? s / warm : 1.0);
    const double u = (s - warm) / (static_cast<double>(total) - warm);
    return lr_min + (lr_max - lr_min) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
}

void bilinear_resize(const Tensor& in, Tensor& out) {
    const ResizeAxis ay = make_axis(in.h, out.h);
    const ResizeAxis ax = make_axis(in.w, out.w);
    for (int i = 0; i < in.n; ++i) {
        for (int c = 0; c < in.c; ++c) {
            const float* src = in.sample(i) + static_cast<std::size_t>(c) * in.h * in.w;
            float* dst = out.sample(i) + static_cast<std::size_t>(c) * out.h * out.w;
            for (int oy = 0; oy < out.h; ++oy) {
                const float fy = ay.frac[oy];
                const float* r0 = src + static_cast<std::size_t>(ay.lo[oy]) * in.w;
                const float* r1 = src + static_cast<std::size_t>(ay.hi[oy]) * in.w;
                float* drow = dst + static_cast<std::size_t>(oy) * out.w;
                for (int ox = 0; ox < out.w; ++ox) {
                    const float fx = ax.frac[ox];
                    const float top = r0[ax.lo[ox]] * (1.0f - fx) + r0[ax.hi[ox]] * fx;
                    const float bot = r1[ax.lo[ox]] * (1.0f - fx) + r1[ax.hi[ox]] * fx;
                    drow[ox] = top * (1.0f - fy) + bot * fy;
                }
            }
        }
    }
}

void bilinear_resize_backward(const Tensor& d_out, Tensor& d_in) {
    const ResizeAxis ay = make_axis(d_in.h, d_out.h);
    const ResizeAxis ax = make_axis(d_in.w, d_out.w);
    d_in.zero();
    for (int i = 0; i < d_out.n; ++i) {
        for (int c = 0; c < d_out.c; ++c) {
            const float* src = d_out.sample(i) + static_cast<std::size_t>(c) * d_out.h * d_out.w;
            float* dst = d_in.sample(i) + static_cast<std::size_t>(c) * d_in.h * d_in.w;
            for (int oy = 0; oy < d_out.h; ++oy) {
                const float fy = ay.frac[oy];
                float* r0 = dst + static_cast<std::size_t>(ay.lo[oy]) * d_in.w;
                float* r1 = dst + static_cast<std::size_t>(ay.hi[oy]) * d_in.w;
                const float* srow = src + static_cast<std::size_t>(oy) * d_out.w;
                for (int ox = 0; ox < d_out.w; ++ox) {
                    const float fx = ax.frac[ox];
                    const float g = srow[ox];
                    r0[ax.lo[ox]] += g * (1.0f - fx) * (1.0f - fy);
                    r0[ax.hi[ox]] += g * fx * (1.0f - fy);
                    r1[ax.lo[ox]] += g * (1.0f - fx) * fy;
                    r1[ax.hi[ox]] += g * fx * fy;
                }
            }
        }
    }
}

void save_checkpoint(const std::filesystem::path& path, std::uint64_t config_digest,
                     std::int64_t step,
                     std::span<const std::pair<std::string, const ParamSet*>> sets) {
    std::uint32_t blocks = 0;
    for (const auto& [prefix, set] : sets) blocks += static_cast<std::uint32_t>(set->params.size());

    detail::Writer w(path);
    w.raw("EFK1", 4);
    w.u64(config_digest);
    w.i64(step);
    w.u32(blocks);
    for (const auto& [prefix, set] : sets) {
        for (const Param& p : set->params) {
            const std::string name = prefix + "." + p.name;
            w.u32(static_cast<std::uint32_t>(name.size()));
            w.raw(name.data(), name.size());
            w.u32(static_cast<std::uint32_t>(p.shape.size()));
            for (int dim : p.shape) w.u32(static_cast<std::uint32_t>(dim));
            w.u64(p.value.size());
            w.raw(p.value.data(), p.value.size() * 4);
        }
    }
    w.close();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    detail::Reader r(path);
    r.expect_magic("EFK1");
    Checkpoint ckpt;
    ckpt.config_digest = r.u64("config digest");
    ckpt.step = r.i64("step");
    const std::uint32_t blocks = r.u32("block count");
    for (std::uint32_t i = 0; i < blocks; ++i) {
        const std::uint32_t name_len = r.u32("block name length");
        std::string name(name_len, '\0');
        r.raw(name.data(), name_len, "block name");
        Param p;
        p.name = name;
        const std::uint32_t ndims = r.u32("block rank");
        p.shape.resize(ndims);
        for (std::uint32_t d = 0; d < ndims; ++d) p.shape[d] = static_cast<int>(r.u32("block dim"));
        const std::uint64_t count = r.u64("block size");
        p.value.resize(count);
        r.raw(p.value.data(), count * 4, "block data");
        ckpt.blocks.emplace(name, std::move(p));
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, const std::string& prefix, ParamSet& params) {
    for (Param& p : params.params) {
        const std::string key = prefix + "." + p.name;
        auto it = ckpt.blocks.find(key);
        if (it == ckpt.blocks.end()) throw FormatError("checkpoint is missing block " + key);
        if (it->second.shape != p.shape || it->second.value.size() != p.value.size())
            throw ShapeError("checkpoint block " + key + " has a different shape");
        p.value = it->second.value;
    }
}

}  // namespace eventfly
