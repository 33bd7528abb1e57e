#pragma once

// Internal eight-wide float helpers for the hand-vectorized kernels.

namespace eventfly::detail {

#if defined(__GNUC__)
typedef float v8f __attribute__((vector_size(32), aligned(4), may_alias));
#define EVENTFLY_V8F 1

inline v8f load8(const float* p) { return *reinterpret_cast<const v8f*>(p); }
inline float hsum8(v8f v) {
    float out = 0.0f;
    for (int q = 0; q < 8; ++q) out += v[q];
    return out;
}
#endif

}  // namespace eventfly::detail
