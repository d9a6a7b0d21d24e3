// NEON variants for aarch64. Same contracts as the scalar kernels; 128-bit
// lanes (4 x i32). NEON is baseline on aarch64, no runtime probe needed.

#include "finegrid/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace finegrid::kernels {
namespace neon_impl {

bool spans_free(const int32_t* occ, const Span* spans, size_t count,
                int32_t free_value, int32_t ignore_value) {
  const int32x4_t vfree = vdupq_n_s32(free_value);
  const int32x4_t vign = vdupq_n_s32(ignore_value);
  for (size_t s = 0; s < count; ++s) {
    const int32_t* p = occ + spans[s].start;
    int32_t len = spans[s].len;
    while (len >= 4) {
      const int32x4_t v = vld1q_s32(p);
      const uint32x4_t ok = vorrq_u32(vceqq_s32(v, vfree), vceqq_s32(v, vign));
      if (vminvq_u32(ok) == 0) return false;
      p += 4;
      len -= 4;
    }
    for (; len > 0; --len, ++p) {
      const int32_t v = *p;
      if (v != free_value && v != ignore_value) return false;
    }
  }
  return true;
}

int64_t count_in_band(const int32_t* rows, const int32_t* cols, size_t count,
                      size_t exclude_index, const BandQuery& q) {
  const int32x4_t vr0 = vdupq_n_s32(q.r0);
  const int32x4_t vc0 = vdupq_n_s32(q.c0);
  const int32x4_t vax = vdupq_n_s32(q.ax);
  const int32x4_t vay = vdupq_n_s32(q.ay);
  const int32x4_t vbx = vdupq_n_s32(q.bx);
  const int32x4_t vby = vdupq_n_s32(q.by);
  const int32x4_t va_min = vdupq_n_s32(q.a_min);
  const int32x4_t va_max = vdupq_n_s32(q.a_max);
  const int32x4_t vc_max = vdupq_n_s32(q.c_max);
  const int32x4_t vc_min = vdupq_n_s32(-q.c_max);

  int64_t n = 0;
  size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const int32x4_t dr = vsubq_s32(vld1q_s32(rows + i), vr0);
    const int32x4_t dc = vsubq_s32(vld1q_s32(cols + i), vc0);
    const int32x4_t a = vaddq_s32(vmulq_s32(dc, vax), vmulq_s32(dr, vay));
    const int32x4_t cc = vaddq_s32(vmulq_s32(dc, vbx), vmulq_s32(dr, vby));
    uint32x4_t in = vandq_u32(vcgeq_s32(a, va_min), vcleq_s32(a, va_max));
    in = vandq_u32(in, vcgeq_s32(cc, vc_min));
    in = vandq_u32(in, vcleq_s32(cc, vc_max));
    uint32x4_t ones = vshrq_n_u32(in, 31);
    if (exclude_index >= i && exclude_index < i + 4) {
      uint32_t lane[4] = {0, 0, 0, 0};
      lane[exclude_index - i] = 1;
      ones = vbicq_u32(ones, vld1q_u32(lane));
    }
    n += vaddvq_u32(ones);
  }
  for (; i < count; ++i) {
    const int32_t dc = cols[i] - q.c0;
    const int32_t dr = rows[i] - q.r0;
    const int32_t a = dc * q.ax + dr * q.ay;
    const int32_t c = dc * q.bx + dr * q.by;
    const bool in = a >= q.a_min && a <= q.a_max && c >= -q.c_max && c <= q.c_max;
    n += (in && i != exclude_index) ? 1 : 0;
  }
  return n;
}

}  // namespace neon_impl

const KernelTable* neon() {
  static const KernelTable t{&neon_impl::spans_free, &neon_impl::count_in_band, "neon"};
  return &t;
}

}  // namespace finegrid::kernels

#endif  // aarch64
