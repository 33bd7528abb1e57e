#pragma once

#include <cstdint>
#include <cstring>

namespace eventfly {

// Branch-free expf with ~2e-7 relative error, written so the compiler can
// vectorize softmax-style loops. Inputs far outside the float range clamp.
inline float fast_exp(float x) {
    x = x < -87.0f ? -87.0f : x;
    x = x > 88.0f ? 88.0f : x;
    const float z = x * 1.44269504088896341f;  // x / ln 2
    const float n = static_cast<float>(static_cast<int>(z + (z >= 0.0f ? 0.5f : -0.5f)));
    float r = x - n * 0.693359375f;
    r -= n * -2.12194440e-4f;
    float p = 1.9875691500e-4f;
    p = p * r + 1.3981999507e-3f;
    p = p * r + 8.3334519073e-3f;
    p = p * r + 4.1665795894e-2f;
    p = p * r + 1.6666665459e-1f;
    p = p * r + 5.0000001201e-1f;
    p = p * r * r + r + 1.0f;
    const std::int32_t biased = static_cast<std::int32_t>(n) + 127;
    std::uint32_t scale_bits = static_cast<std::uint32_t>(biased) << 23;
    float scale;
    std::memcpy(&scale, &scale_bits, 4);
    return p * scale;
}

// logf counterpart (~1e-7 relative); x must be positive and finite.
inline float fast_log(float x) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    int e = static_cast<int>(bits >> 23) - 126;
    bits = (bits & 0x007FFFFFu) | 0x3F000000u;  // mantissa into [0.5, 1)
    float m;
    std::memcpy(&m, &bits, 4);
    if (m < 0.70710678118654752440f) {
        m += m;
        e -= 1;
    }
    const float f = m - 1.0f;
    float p = 7.0376836292e-2f;
    p = p * f + -1.1514610310e-1f;
    p = p * f + 1.1676998740e-1f;
    p = p * f + -1.2420140846e-1f;
    p = p * f + 1.4249322787e-1f;
    p = p * f + -1.6668057665e-1f;
    p = p * f + 2.0000714765e-1f;
    p = p * f + -2.4999993993e-1f;
    p = p * f + 3.3333331174e-1f;
    float r = p * f * f * f;
    const float fe = static_cast<float>(e);
    r += fe * -2.12194440e-4f;
    r -= 0.5f * f * f;
    r = f + r;
    r += fe * 0.693359375f;
    return r;
}


#if defined(__GNUC__)
namespace detail {
typedef float vf8 __attribute__((vector_size(32), aligned(4), may_alias));
typedef std::int32_t vi8 __attribute__((vector_size(32), aligned(4), may_alias));
}  // namespace detail

// out[i] = fast_exp(a[i] - b[i]) for eight-wide blocks; the tail falls back
// to the scalar version. Used by the softmax-style row loops.
inline void fast_exp_sub_row(const float* a, const float* b, float* out, int n) {
    using detail::vf8;
    using detail::vi8;
    int x = 0;
    for (; x + 8 <= n; x += 8) {
        vf8 v = *reinterpret_cast<const vf8*>(a + x) - *reinterpret_cast<const vf8*>(b + x);
        v = v < -87.0f ? vf8{} - 87.0f : v;
        v = v > 88.0f ? vf8{} + 88.0f : v;
        const vf8 z = v * 1.44269504088896341f;
        const vi8 ni = __builtin_convertvector(z + (z >= 0.0f ? vf8{} + 0.5f : vf8{} - 0.5f), vi8);
        const vf8 nf = __builtin_convertvector(ni, vf8);
        vf8 r = v - nf * 0.693359375f;
        r -= nf * -2.12194440e-4f;
        vf8 p = vf8{} + 1.9875691500e-4f;
        p = p * r + 1.3981999507e-3f;
        p = p * r + 8.3334519073e-3f;
        p = p * r + 4.1665795894e-2f;
        p = p * r + 1.6666665459e-1f;
        p = p * r + 5.0000001201e-1f;
        p = p * r * r + r + 1.0f;
        const vi8 bits = (ni + 127) << 23;
        const vf8 scale = *reinterpret_cast<const vf8*>(&bits);
        *reinterpret_cast<vf8*>(out + x) = p * scale;
    }
    for (; x < n; ++x) out[x] = fast_exp(a[x] - b[x]);
}
#else
inline void fast_exp_sub_row(const float* a, const float* b, float* out, int n) {
    for (int x = 0; x < n; ++x) out[x] = fast_exp(a[x] - b[x]);
}
#endif

}  // namespace eventfly
