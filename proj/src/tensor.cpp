#include "eventfly/tensor.hpp"

#include <numeric>

#include "simd.hpp"

namespace eventfly {

Param& ParamSet::add(std::string name, std::vector<int> shape) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    Param p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(count, 0.0f);
    p.grad.assign(count, 0.0f);
    p.m1.assign(count, 0.0f);
    p.m2.assign(count, 0.0f);
    params.push_back(std::move(p));
    return params.back();
}

Param& ParamSet::find(const std::string& name) {
    for (Param& p : params)
        if (p.name == name) return p;
    throw StateError("no parameter named " + name);
}

void ParamSet::zero_grad() {
    for (Param& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
}

std::size_t ParamSet::total_size() const {
    std::size_t total = 0;
    for (const Param& p : params) total += p.size();
    return total;
}

// Four output rows share each B load, which keeps the FMA units fed instead
// of stalling on memory.
void gemm(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i) c[i] = 0.0f;
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        float* c0 = c + static_cast<std::size_t>(i) * n;
        float* c1 = c0 + n;
        float* c2 = c1 + n;
        float* c3 = c2 + n;
        const float* a0 = a + static_cast<std::size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const float v0 = a0[l];
            const float v1 = a0[k + l];
            const float v2 = a0[2 * k + l];
            const float v3 = a0[3 * k + l];
            const float* brow = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) {
                const float bv = brow[j];
                c0[j] += v0 * bv;
                c1[j] += v1 * bv;
                c2[j] += v2 * bv;
                c3[j] += v3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        float* crow = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const float av = a[static_cast<std::size_t>(i) * k + l];
            const float* brow = b + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_at_b(const float* a, const float* b, float* c, int m, int k, int n) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(k) * n; ++i) c[i] = 0.0f;
    for (int i = 0; i < m; ++i) {
        const float* brow = b + static_cast<std::size_t>(i) * n;
        int l = 0;
        for (; l + 4 <= k; l += 4) {
            const float v0 = a[static_cast<std::size_t>(i) * k + l];
            const float v1 = a[static_cast<std::size_t>(i) * k + l + 1];
            const float v2 = a[static_cast<std::size_t>(i) * k + l + 2];
            const float v3 = a[static_cast<std::size_t>(i) * k + l + 3];
            float* c0 = c + static_cast<std::size_t>(l) * n;
            float* c1 = c0 + n;
            float* c2 = c1 + n;
            float* c3 = c2 + n;
            for (int j = 0; j < n; ++j) {
                const float bv = brow[j];
                c0[j] += v0 * bv;
                c1[j] += v1 * bv;
                c2[j] += v2 * bv;
                c3[j] += v3 * bv;
            }
        }
        for (; l < k; ++l) {
            const float av = a[static_cast<std::size_t>(i) * k + l];
            float* crow = c + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

#if defined(EVENTFLY_V8F)
using detail::hsum8;
using detail::load8;
using detail::v8f;

// Dot products over n; explicit vector lanes keep the reductions on the FMA
// units, and four k rows per pass reuse each A load.
void gemm_a_bt_acc(const float* a, const float* b, float* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<std::size_t>(i) * n;
        int l = 0;
        for (; l + 4 <= k; l += 4) {
            const float* b0 = b + static_cast<std::size_t>(l) * n;
            const float* b1 = b0 + n;
            const float* b2 = b1 + n;
            const float* b3 = b2 + n;
            v8f acc0 = {}, acc1 = {}, acc2 = {}, acc3 = {};
            int j = 0;
            for (; j + 8 <= n; j += 8) {
                const v8f av = load8(arow + j);
                acc0 += av * load8(b0 + j);
                acc1 += av * load8(b1 + j);
                acc2 += av * load8(b2 + j);
                acc3 += av * load8(b3 + j);
            }
            float s0 = hsum8(acc0), s1 = hsum8(acc1), s2 = hsum8(acc2), s3 = hsum8(acc3);
            for (; j < n; ++j) {
                const float av = arow[j];
                s0 += av * b0[j];
                s1 += av * b1[j];
                s2 += av * b2[j];
                s3 += av * b3[j];
            }
            float* crow = c + static_cast<std::size_t>(i) * k + l;
            crow[0] += s0;
            crow[1] += s1;
            crow[2] += s2;
            crow[3] += s3;
        }
        for (; l < k; ++l) {
            const float* brow = b + static_cast<std::size_t>(l) * n;
            v8f acc = {};
            int j = 0;
            for (; j + 8 <= n; j += 8) acc += load8(arow + j) * load8(brow + j);
            float s = hsum8(acc);
            for (; j < n; ++j) s += arow[j] * brow[j];
            c[static_cast<std::size_t>(i) * k + l] += s;
        }
    }
}
#else
void gemm_a_bt_acc(const float* a, const float* b, float* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const float* arow = a + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const float* brow = b + static_cast<std::size_t>(l) * n;
            float s = 0.0f;
            for (int j = 0; j < n; ++j) s += arow[j] * brow[j];
            c[static_cast<std::size_t>(i) * k + l] += s;
        }
    }
}
#endif

}  // namespace eventfly
