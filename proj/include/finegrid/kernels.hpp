#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops of the simulation, as scalar reference kernels
// plus SIMD variants selected at runtime. Everything here works on plain
// arrays; the grid/engine layers own the data and translate queries into
// integer form before calling in.
//
// Two kernels carry nearly all of the per-tick arithmetic:
//   spans_free      - is a set of contiguous occupancy-row spans entirely
//                     free (or owned by one agent)?  Runs 8x per candidate
//                     move of every agent.
//   count_in_band   - how many agent centers fall inside an oriented
//                     perception band?  Runs on every density refresh.
//
// Both are exact integer computations, so scalar and SIMD variants must
// agree bit-for-bit on every input; the equivalence tests assert that.

namespace finegrid::kernels {

// Contiguous run of cells in the row-major occupancy array.
struct Span {
  int32_t start;  // linear index of first cell
  int32_t len;    // number of cells, > 0
};

// Perception band in lattice coordinates. For an agent centered at
// (r0, c0), another center at (r, c) with dc = c - c0, dr = r - r0 is
// counted iff
//   a_min <= dc*ax + dr*ay <= a_max   and   |dc*bx + dr*by| <= c_max
// with ax, ay, bx, by in {-1, 0, 1}. Axis-aligned and 45-degree bands both
// reduce to this form (the 45-degree thresholds absorb the sqrt(2)).
struct BandQuery {
  int32_t r0 = 0;
  int32_t c0 = 0;
  int32_t ax = 1, ay = 0;
  int32_t bx = 0, by = 1;
  int32_t a_min = 0;
  int32_t a_max = 0;
  int32_t c_max = 0;
};

using SpansFreeFn = bool (*)(const int32_t* occ, const Span* spans, size_t count,
                             int32_t free_value, int32_t ignore_value);
using CountInBandFn = int64_t (*)(const int32_t* rows, const int32_t* cols, size_t count,
                                  size_t exclude_index, const BandQuery& q);

struct KernelTable {
  SpansFreeFn spans_free;
  CountInBandFn count_in_band;
  const char* name;
};

// Scalar reference implementation. Always available.
const KernelTable& scalar();

// SIMD variants; null when the build or the running CPU lacks them.
const KernelTable* avx2();
const KernelTable* neon();

// Best table for this process: SIMD when supported, else scalar. The
// FINEGRID_KERNELS environment variable (scalar|avx2|neon) forces a choice;
// an unavailable forced choice falls back to scalar.
const KernelTable& active();

}  // namespace finegrid::kernels
