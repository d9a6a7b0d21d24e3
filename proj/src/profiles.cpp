#include "finegrid/profiles.hpp"

#include <algorithm>
#include <cmath>

#include "finegrid/errors.hpp"

namespace finegrid {

bool Footprint::contains(int32_t dr, int32_t dc) const {
  for (const RowSpan& s : spans) {
    if (s.dr == dr) return dc >= s.c0 && dc <= s.c1;
  }
  return false;
}

int32_t BodyMap::max_cell_count() const {
  int32_t m = 0;
  for (const Footprint& f : dir) m = std::max(m, f.cell_count);
  return m;
}

Footprint rasterize_footprint(const ShapeSpec& shape, Dir d) {
  if (shape.width_m <= 0.0 || shape.length_m <= 0.0) {
    throw ConfigError("rasterize_footprint: shape has zero or negative extent");
  }
  const DirInfo& di = kDirs[d];
  const double h = kCellSize;
  const double half_l = shape.length_m / 2.0;
  const double half_w = shape.width_m / 2.0;
  // Anchor at the center cell's corner so an axis-aligned L x W rectangle
  // with L, W multiples of the cell size covers exactly (L/h) x (W/h) cells.
  const double anchor = h / 2.0;
  const double reach = std::max(half_l, half_w) + h;
  const int32_t radius = static_cast<int32_t>(std::ceil(reach / h));

  std::vector<std::vector<int32_t>> cols_by_row(2 * radius + 1);
  for (int32_t dr = -radius; dr <= radius; ++dr) {
    for (int32_t dc = -radius; dc <= radius; ++dc) {
      const double x = dc * h - anchor;
      const double y = dr * h - anchor;
      const double a = x * di.ux + y * di.uy;             // along movement
      const double c = x * (-di.uy) + y * di.ux;          // across
      bool inside;
      if (shape.kind == ShapeSpec::Kind::Rect) {
        inside = std::abs(a) <= half_l + 1e-12 && std::abs(c) <= half_w + 1e-12;
      } else {
        const double ea = a / half_l;
        const double ec = c / half_w;
        inside = ea * ea + ec * ec <= 1.0 + 1e-12;
      }
      if (inside || (dr == 0 && dc == 0)) cols_by_row[dr + radius].push_back(dc);
    }
  }

  Footprint fp;
  fp.min_dr = fp.max_dr = 0;
  fp.min_dc = fp.max_dc = 0;
  for (int32_t dr = -radius; dr <= radius; ++dr) {
    const auto& cols = cols_by_row[dr + radius];
    if (cols.empty()) continue;
    // Convexity gives contiguous columns per row.
    fp.spans.push_back({static_cast<int16_t>(dr), static_cast<int16_t>(cols.front()),
                        static_cast<int16_t>(cols.back())});
    fp.cell_count += static_cast<int32_t>(cols.size());
    fp.min_dr = std::min<int16_t>(fp.min_dr, static_cast<int16_t>(dr));
    fp.max_dr = std::max<int16_t>(fp.max_dr, static_cast<int16_t>(dr));
    fp.min_dc = std::min<int16_t>(fp.min_dc, static_cast<int16_t>(cols.front()));
    fp.max_dc = std::max<int16_t>(fp.max_dc, static_cast<int16_t>(cols.back()));
  }
  return fp;
}

BodyMap rasterize_body_map(const ShapeSpec& shape) {
  BodyMap bm;
  for (int d = 0; d < 8; ++d) bm.dir[d] = rasterize_footprint(shape, static_cast<Dir>(d));
  return bm;
}

double DensitySpeedCurve::speed_at(double density) const {
  if (density < 0.0) throw ConfigError("speed_at: negative density");
  if (density >= stall_density) return 0.0;
  if (density <= samples.front().first) return samples.front().second;
  for (size_t i = 1; i < samples.size(); ++i) {
    if (density <= samples[i].first) {
      const auto& [d0, v0] = samples[i - 1];
      const auto& [d1, v1] = samples[i];
      const double t = (density - d0) / (d1 - d0);
      return v0 + t * (v1 - v0);
    }
  }
  // Past the last sample but below stall: ramp down to zero at stall.
  const auto& [dl, vl] = samples.back();
  if (stall_density <= dl) return 0.0;
  const double t = (density - dl) / (stall_density - dl);
  return vl * (1.0 - t);
}

void DensitySpeedCurve::validate() const {
  if (samples.empty()) throw ConfigError("curve: no samples");
  if (samples.front().first != 0.0) throw ConfigError("curve: first sample must be at density 0");
  if (stall_density <= 0.0) throw ConfigError("curve: stall_density must be positive");
  double prev_d = -1.0, prev_v = samples.front().second + 1.0;
  for (const auto& [d, v] : samples) {
    if (d <= prev_d) throw ConfigError("curve: sample densities must ascend");
    if (v < 0.0) throw ConfigError("curve: negative speed sample");
    if (v > prev_v + 1e-12) throw ConfigError("curve: speed samples must be non-increasing");
    prev_d = d;
    prev_v = v;
  }
}

double weidmann_speed(double density) {
  constexpr double v_f = 1.34;
  constexpr double gamma = 1.913;
  constexpr double rho_max = 5.4;
  if (density <= 0.0) return v_f;
  if (density >= rho_max) return 0.0;
  const double v = v_f * (1.0 - std::exp(-gamma * (1.0 / density - 1.0 / rho_max)));
  return std::max(0.0, v);
}

CurveFamily curve_family_from_name(const std::string& name) {
  if (name == "weidmann") return CurveFamily::Weidmann;
  if (name == "fruin") return CurveFamily::Fruin;
  throw ConfigError("unknown curve family '" + name + "' (expected weidmann or fruin)");
}

const char* curve_family_name(CurveFamily f) {
  return f == CurveFamily::Weidmann ? "weidmann" : "fruin";
}

DensitySpeedCurve builtin_curve(CurveFamily family) {
  DensitySpeedCurve curve;
  if (family == CurveFamily::Weidmann) {
    curve.stall_density = 5.4;
    for (int i = 0; i <= 108; ++i) {
      const double rho = i * 0.05;
      curve.samples.emplace_back(rho, weidmann_speed(rho));
    }
  } else {
    curve.stall_density = 4.0;
    curve.samples.emplace_back(0.0, 1.344);
    curve.samples.emplace_back(4.0, 0.0);
  }
  curve.validate();
  return curve;
}

DensitySpeedCurve scale_curve(const DensitySpeedCurve& pedestrian, double v_ff_wheelchair) {
  if (v_ff_wheelchair <= 0.0) throw ConfigError("scale_curve: free-flow speed must be positive");
  pedestrian.validate();
  const double factor = v_ff_wheelchair / pedestrian.free_flow_speed();
  DensitySpeedCurve scaled = pedestrian;
  for (auto& [d, v] : scaled.samples) v *= factor;
  return scaled;
}

void EntityProfile::validate() const {
  curve.validate();
  if (free_flow_speed <= 0.0 || free_flow_speed > kMaxSpeedCells * kCellSize) {
    throw ConfigError("profile '" + name + "': free-flow speed outside (0, 2.0] m/s");
  }
  if (std::abs(curve.free_flow_speed() - free_flow_speed) > 1e-9) {
    throw ConfigError("profile '" + name + "': curve intercept does not match free-flow speed");
  }
  const int32_t base = body.dir[0].cell_count;
  for (int d = 0; d < 8; ++d) {
    const Footprint& f = body.dir[d];
    if (!f.contains(0, 0)) throw ConfigError("profile '" + name + "': footprint misses center");
    if (std::abs(f.cell_count - base) > 0.15 * base) {
      throw ConfigError("profile '" + name + "': directional footprints differ by more than 15%");
    }
  }
}

EntityProfile builtin_profile(ProfileKind kind, CurveFamily family) {
  const DensitySpeedCurve ped_curve = builtin_curve(family);
  EntityProfile p;
  switch (kind) {
    case ProfileKind::Pedestrian:
      p.name = "pedestrian";
      p.shape = {ShapeSpec::Kind::Ellipse, 0.50, 0.30};
      p.free_flow_speed = ped_curve.free_flow_speed();
      p.curve = ped_curve;
      break;
    case ProfileKind::AssistedWheelchair:
      p.name = "assisted_wheelchair";
      p.shape = {ShapeSpec::Kind::Rect, 0.70, 1.60};
      p.free_flow_speed = 1.083;
      p.curve = scale_curve(ped_curve, 1.083);
      break;
    case ProfileKind::NonAssistedWheelchair:
      p.name = "nonassisted_wheelchair";
      p.shape = {ShapeSpec::Kind::Rect, 0.70, 1.10};
      p.free_flow_speed = 0.8;
      p.curve = scale_curve(ped_curve, 0.8);
      break;
  }
  p.body = rasterize_body_map(p.shape);
  p.validate();
  return p;
}

EntityProfile builtin_profile(const std::string& name, CurveFamily family) {
  if (name == "pedestrian") return builtin_profile(ProfileKind::Pedestrian, family);
  if (name == "assisted_wheelchair") return builtin_profile(ProfileKind::AssistedWheelchair, family);
  if (name == "nonassisted_wheelchair") {
    return builtin_profile(ProfileKind::NonAssistedWheelchair, family);
  }
  throw ConfigError("unknown profile '" + name + "'");
}

}  // namespace finegrid
