// AVX2 variants of the occupancy and perception kernels. This translation
// unit is compiled with -mavx2 on x86-64 and gated at runtime through
// __builtin_cpu_supports, so the rest of the binary stays baseline-ISA.

#include "finegrid/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace finegrid::kernels {
namespace avx2_impl {

bool spans_free(const int32_t* occ, const Span* spans, size_t count,
                int32_t free_value, int32_t ignore_value) {
  const __m256i vfree = _mm256_set1_epi32(free_value);
  const __m256i vign = _mm256_set1_epi32(ignore_value);
  for (size_t s = 0; s < count; ++s) {
    const int32_t* p = occ + spans[s].start;
    int32_t len = spans[s].len;
    while (len >= 8) {
      const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p));
      const __m256i ok = _mm256_or_si256(_mm256_cmpeq_epi32(v, vfree), _mm256_cmpeq_epi32(v, vign));
      if (_mm256_movemask_epi8(ok) != -1) return false;
      p += 8;
      len -= 8;
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
  const __m256i vr0 = _mm256_set1_epi32(q.r0);
  const __m256i vc0 = _mm256_set1_epi32(q.c0);
  const __m256i vax = _mm256_set1_epi32(q.ax);
  const __m256i vay = _mm256_set1_epi32(q.ay);
  const __m256i vbx = _mm256_set1_epi32(q.bx);
  const __m256i vby = _mm256_set1_epi32(q.by);
  const __m256i va_min = _mm256_set1_epi32(q.a_min);
  const __m256i va_max = _mm256_set1_epi32(q.a_max);
  const __m256i vc_max = _mm256_set1_epi32(q.c_max);
  const __m256i vc_min = _mm256_set1_epi32(-q.c_max);

  int64_t n = 0;
  size_t i = 0;
  for (; i + 8 <= count; i += 8) {
    const __m256i r = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rows + i));
    const __m256i c = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(cols + i));
    const __m256i dr = _mm256_sub_epi32(r, vr0);
    const __m256i dc = _mm256_sub_epi32(c, vc0);
    const __m256i a = _mm256_add_epi32(_mm256_mullo_epi32(dc, vax), _mm256_mullo_epi32(dr, vay));
    const __m256i cc = _mm256_add_epi32(_mm256_mullo_epi32(dc, vbx), _mm256_mullo_epi32(dr, vby));
    // a_min <= a <= a_max  &&  -c_max <= cc <= c_max, as "not greater / not less"
    __m256i in = _mm256_andnot_si256(_mm256_cmpgt_epi32(va_min, a), _mm256_set1_epi32(-1));
    in = _mm256_andnot_si256(_mm256_cmpgt_epi32(a, va_max), in);
    in = _mm256_andnot_si256(_mm256_cmpgt_epi32(vc_min, cc), in);
    in = _mm256_andnot_si256(_mm256_cmpgt_epi32(cc, vc_max), in);
    unsigned mask = static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(in)));
    if (exclude_index >= i && exclude_index < i + 8) mask &= ~(1u << (exclude_index - i));
    n += __builtin_popcount(mask);
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

}  // namespace avx2_impl

const KernelTable* avx2() {
  static const KernelTable* table = []() -> const KernelTable* {
    if (!__builtin_cpu_supports("avx2")) return nullptr;
    static const KernelTable t{&avx2_impl::spans_free, &avx2_impl::count_in_band, "avx2"};
    return &t;
  }();
  return table;
}

}  // namespace finegrid::kernels

#endif  // x86-64
