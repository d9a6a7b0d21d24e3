#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "finegrid/geometry.hpp"

namespace finegrid {

// Entity outline in meters. width_m is the extent across the movement
// direction, length_m along it.
struct ShapeSpec {
  enum class Kind { Rect, Ellipse };
  Kind kind = Kind::Rect;
  double width_m = 0.0;
  double length_m = 0.0;
};

// One directional footprint: the cells an entity occupies, relative to its
// center cell, stored as per-row column spans (all shapes are convex, so one
// span per row).
struct Footprint {
  struct RowSpan {
    int16_t dr;
    int16_t c0;  // inclusive
    int16_t c1;  // inclusive
  };
  std::vector<RowSpan> spans;
  int32_t cell_count = 0;
  int16_t min_dr = 0, max_dr = 0;
  int16_t min_dc = 0, max_dc = 0;

  bool contains(int32_t dr, int32_t dc) const;
};

// Rasterize a shape rotated to one of the 8 directions. Cell-center
// inclusion against the shape anchored at the center cell's upper-right
// corner; the relative offset (0,0) is always part of the result.
Footprint rasterize_footprint(const ShapeSpec& shape, Dir dir);

// The 8 directional footprints of one entity class.
struct BodyMap {
  std::array<Footprint, 8> dir;
  int32_t max_cell_count() const;
};

BodyMap rasterize_body_map(const ShapeSpec& shape);

// Piecewise-linear density -> speed relation. Samples ascend in density,
// speed is non-increasing, and speed is 0 at and beyond stall_density.
struct DensitySpeedCurve {
  std::vector<std::pair<double, double>> samples;  // (entities/m^2, m/s)
  double stall_density = 0.0;

  double free_flow_speed() const { return samples.front().second; }
  double speed_at(double density) const;
  void validate() const;  // throws ConfigError
};

enum class CurveFamily { Weidmann, Fruin };

CurveFamily curve_family_from_name(const std::string& name);
const char* curve_family_name(CurveFamily f);

// Weidmann: sampled from the Kladek form
//   v(rho) = 1.34 * (1 - exp(-1.913 * (1/rho - 1/5.4)))
// clamped at 0, stall at 5.4/m^2. Fruin: linear ramp from 1.344 m/s at zero
// density down to 0 at 4/m^2 (only the extremes are published; the ramp is
// an approximation).
DensitySpeedCurve builtin_curve(CurveFamily family);

// Closed-form Weidmann evaluation (not the sampled table).
double weidmann_speed(double density);

// Scale a pedestrian curve to a wheelchair free-flow speed: every speed
// sample is multiplied by v_ff / curve free-flow; densities and the stall
// density stay put (a stopped crowd stops the wheelchairs too).
DensitySpeedCurve scale_curve(const DensitySpeedCurve& pedestrian, double v_ff_wheelchair);

struct EntityProfile {
  std::string name;
  ShapeSpec shape;
  BodyMap body;
  double free_flow_speed = 0.0;  // m/s, equals curve.free_flow_speed()
  DensitySpeedCurve curve;

  double halfwidth_m() const { return shape.width_m / 2.0; }
  double front_offset_m() const { return shape.length_m / 2.0; }
  void validate() const;
};

enum class ProfileKind { Pedestrian, AssistedWheelchair, NonAssistedWheelchair };

// The three entity classes used throughout: pedestrians (0.50 x 0.30 m
// ellipse, curve-family free-flow), non-assisted manual or motorized
// wheelchairs (0.70 x 1.10 m, 0.8 m/s) and assisted wheelchairs including
// the person pushing (0.70 x 1.60 m, 1.083 m/s). Wheelchair curves are the
// scaled pedestrian curve.
EntityProfile builtin_profile(ProfileKind kind, CurveFamily family);
EntityProfile builtin_profile(const std::string& name, CurveFamily family);

}  // namespace finegrid
