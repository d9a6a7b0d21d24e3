#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace finegrid {

// Lattice constants. The engine is built around a 5 cm cell and a 25 ms tick,
// which gives 41 speed levels (0..40 cells per second).
inline constexpr double kCellSize = 0.05;      // m
inline constexpr double kTickSeconds = 0.025;  // s
inline constexpr int kMaxSpeedCells = 40;      // cells per second
inline constexpr double kSqrt2 = 1.41421356237309504880;

struct GridIndex {
  int32_t row = 0;
  int32_t col = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

// Axis-aligned rectangle in meters, origin at lower-left.
struct RectM {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool contains(double px, double py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

// The 8 Moore directions, y up. Index order is fixed; agents, body maps and
// the selection logic all use it.
enum Dir : uint8_t { kEast = 0, kNorthEast, kNorth, kNorthWest, kWest, kSouthWest, kSouth, kSouthEast };

struct DirInfo {
  int32_t dc;
  int32_t dr;
  double ux;  // unit vector
  double uy;
  double step_cost;  // cells: 1 or sqrt(2)
  bool diagonal;
};

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline constexpr std::array<DirInfo, 8> kDirs = {{
    {+1, 0, 1.0, 0.0, 1.0, false},
    {+1, +1, kInvSqrt2, kInvSqrt2, kSqrt2, true},
    {0, +1, 0.0, 1.0, 1.0, false},
    {-1, +1, -kInvSqrt2, kInvSqrt2, kSqrt2, true},
    {-1, 0, -1.0, 0.0, 1.0, false},
    {-1, -1, -kInvSqrt2, -kInvSqrt2, kSqrt2, true},
    {0, -1, 0.0, -1.0, 1.0, false},
    {+1, -1, kInvSqrt2, -kInvSqrt2, kSqrt2, true},
}};

// Center point of a cell in meters.
inline double cell_center_x(int32_t col) { return (col + 0.5) * kCellSize; }
inline double cell_center_y(int32_t row) { return (row + 0.5) * kCellSize; }

}  // namespace finegrid
