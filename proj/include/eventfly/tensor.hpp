#pragma once

#include <string>
#include <vector>

#include "eventfly/types.hpp"

namespace eventfly {

// Dense (n, c, h, w) float tensor, C-order.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    std::size_t size() const { return v.size(); }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    float* sample(int i) { return v.data() + i * sample_size(); }
    const float* sample(int i) const { return v.data() + i * sample_size(); }

    void resize(int n_, int c_, int h_, int w_) {
        n = n_;
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f);
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Named parameter block with gradient and optimizer moments.
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;
    std::vector<float> m1;  // first moment
    std::vector<float> m2;  // second moment

    std::size_t size() const { return value.size(); }
};

struct ParamSet {
    std::vector<Param> params;

    Param& add(std::string name, std::vector<int> shape);
    Param& find(const std::string& name);
    void zero_grad();
    std::size_t total_size() const;
};

// Even/odd column split of one sample; stride-2 convolutions work on these
// planes so every kernel tap is a unit-stride row operation.
struct EvenOddPlanes {
    int h = 0, half = 0, ch = 0;
    std::vector<float> even, odd;  // (c, h, half)

    void split(const float* x, int ch_, int h_, int w_) {
        ch = ch_;
        h = h_;
        half = w_ / 2;
        const std::size_t plane = static_cast<std::size_t>(h) * half;
        even.resize(plane * ch);
        odd.resize(plane * ch);
        for (int c = 0; c < ch; ++c) {
            for (int y = 0; y < h; ++y) {
                const float* row = x + (static_cast<std::size_t>(c) * h + y) * w_;
                float* e = even.data() + (static_cast<std::size_t>(c) * h + y) * half;
                float* o = odd.data() + (static_cast<std::size_t>(c) * h + y) * half;
                for (int j = 0; j < half; ++j) {
                    e[j] = row[2 * j];
                    o[j] = row[2 * j + 1];
                }
            }
        }
    }
    const float* even_row(int c, int y) const {
        return even.data() + (static_cast<std::size_t>(c) * h + y) * half;
    }
    const float* odd_row(int c, int y) const {
        return odd.data() + (static_cast<std::size_t>(c) * h + y) * half;
    }
};

// Scratch buffers reused across convolution calls.
struct Workspace {
    std::vector<float> col;
    std::vector<float> dcol;
    EvenOddPlanes even_odd;
};

// C[m,n] (+)= sum_k A[m,k] * B[k,n]
void gemm(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
// C[k,n] = sum_m A[m,k] * B[m,n]
void gemm_at_b(const float* a, const float* b, float* c, int m, int k, int n);
// C[m,k] += sum_n A[m,n] * B[k,n]
void gemm_a_bt_acc(const float* a, const float* b, float* c, int m, int n, int k);

}  // namespace eventfly
