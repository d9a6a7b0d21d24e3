#include "finegrid/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace finegrid::kernels {

namespace scalar_impl {

bool spans_free(const int32_t* occ, const Span* spans, size_t count,
                int32_t free_value, int32_t ignore_value) {
  for (size_t s = 0; s < count; ++s) {
    const int32_t* p = occ + spans[s].start;
    const int32_t* end = p + spans[s].len;
    for (; p != end; ++p) {
      const int32_t v = *p;
      if (v != free_value && v != ignore_value) return false;
    }
  }
  return true;
}

int64_t count_in_band(const int32_t* rows, const int32_t* cols, size_t count,
                      size_t exclude_index, const BandQuery& q) {
  int64_t n = 0;
  for (size_t i = 0; i < count; ++i) {
    const int32_t dc = cols[i] - q.c0;
    const int32_t dr = rows[i] - q.r0;
    const int32_t a = dc * q.ax + dr * q.ay;
    const int32_t c = dc * q.bx + dr * q.by;
    const bool in = a >= q.a_min && a <= q.a_max && c >= -q.c_max && c <= q.c_max;
    n += (in && i != exclude_index) ? 1 : 0;
  }
  return n;
}

}  // namespace scalar_impl

const KernelTable& scalar() {
  static const KernelTable t{&scalar_impl::spans_free, &scalar_impl::count_in_band, "scalar"};
  return t;
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* force = std::getenv("FINEGRID_KERNELS");
    if (force) {
      if (std::strcmp(force, "scalar") == 0) return &scalar();
      if (std::strcmp(force, "avx2") == 0 && avx2()) return avx2();
      if (std::strcmp(force, "neon") == 0 && neon()) return neon();
      return &scalar();
    }
    if (const KernelTable* t = avx2()) return t;
    if (const KernelTable* t = neon()) return t;
    return &scalar();
  }();
  return *chosen;
}

#if !defined(__x86_64__) && !defined(_M_X64)
const KernelTable* avx2() { return nullptr; }
#endif
#if !defined(__aarch64__)
const KernelTable* neon() { return nullptr; }
#endif

}  // namespace finegrid::kernels
