#include "finegrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "finegrid/errors.hpp"
#include "finegrid/kernels.hpp"

namespace finegrid {

Grid Grid::build(double width_m, double height_m, std::span<const RectM> obstacles,
                 std::span<const NamedRect> targets) {
  if (width_m <= 0.0 || height_m <= 0.0) {
    throw ConfigError("grid dimensions must be positive");
  }
  const auto check_bounds = [&](const RectM& rc, const char* what) {
    constexpr double kEps = 1e-9;
    if (rc.w <= 0.0 || rc.h <= 0.0 || rc.x < -kEps || rc.y < -kEps ||
        rc.x + rc.w > width_m + kEps || rc.y + rc.h > height_m + kEps) {
      throw ConfigError(std::string(what) + " rectangle out of bounds");
    }
  };
  for (const RectM& ob : obstacles) check_bounds(ob, "obstacle");
  for (const NamedRect& t : targets) check_bounds(t.rect, "target");

  Grid g;
  g.cols_ = static_cast<int32_t>(std::ceil(width_m / kCellSize - 1e-9));
  g.rows_ = static_cast<int32_t>(std::ceil(height_m / kCellSize - 1e-9));
  const size_t n = static_cast<size_t>(g.rows_) * g.cols_;
  g.occ_.assign(n, kCellEmpty);
  g.target_id_.assign(n, -1);

  for (int32_t r = 0; r < g.rows_; ++r) {
    for (int32_t c = 0; c < g.cols_; ++c) {
      const double px = cell_center_x(c);
      const double py = cell_center_y(r);
      for (const RectM& ob : obstacles) {
        if (ob.contains(px, py)) {
          g.occ_[g.linear({r, c})] = kCellObstacle;
          break;
        }
      }
    }
  }

  for (const NamedRect& t : targets) {
    const auto id = static_cast<int16_t>(g.target_names_.size());
    if (id >= std::numeric_limits<int16_t>::max()) throw ConfigError("too many targets");
    g.target_names_.push_back(t.name);
    g.target_cells_.emplace_back();
    for (int32_t r = 0; r < g.rows_; ++r) {
      for (int32_t c = 0; c < g.cols_; ++c) {
        const GridIndex cell{r, c};
        if (!t.rect.contains(cell_center_x(c), cell_center_y(r))) continue;
        if (g.occ_[g.linear(cell)] == kCellObstacle) {
          throw ConfigError("target '" + t.name + "' overlaps an obstacle");
        }
        if (g.target_id_[g.linear(cell)] >= 0) {
          throw ConfigError("target regions overlap at row " + std::to_string(r) + " col " +
                            std::to_string(c));
        }
        g.target_id_[g.linear(cell)] = id;
        g.target_cells_.back().push_back(cell);
      }
    }
    if (g.target_cells_.back().empty()) {
      throw ConfigError("target '" + t.name + "' covers no free cell");
    }
  }
  return g;
}

int32_t Grid::target_id(const std::string& name) const {
  for (size_t i = 0; i < target_names_.size(); ++i) {
    if (target_names_[i] == name) return static_cast<int32_t>(i);
  }
  throw ConfigError("unknown target '" + name + "'");
}

bool Grid::footprint_free(const Footprint& fp, GridIndex center, int32_t ignore_agent) const {
  if (center.row + fp.min_dr < 0 || center.row + fp.max_dr >= rows_ || center.col + fp.min_dc < 0 ||
      center.col + fp.max_dc >= cols_) {
    return false;
  }
  constexpr size_t kMaxRows = 64;
  kernels::Span spans[kMaxRows];
  size_t ns = 0;
  for (const Footprint::RowSpan& rs : fp.spans) {
    const size_t base = linear({center.row + rs.dr, static_cast<int32_t>(center.col + rs.c0)});
    spans[ns++] = {static_cast<int32_t>(base), static_cast<int32_t>(rs.c1 - rs.c0 + 1)};
    if (ns == kMaxRows) {
      if (!kernels::active().spans_free(occ_.data(), spans, ns, kCellEmpty, ignore_agent)) {
        return false;
      }
      ns = 0;
    }
  }
  return ns == 0 || kernels::active().spans_free(occ_.data(), spans, ns, kCellEmpty, ignore_agent);
}

void Grid::place_footprint(int32_t agent_id, const Footprint& fp, GridIndex center) {
  if (agent_id < 0) throw InvariantError("agent id must be non-negative");
  if (placements_.contains(agent_id)) {
    throw InvariantError("agent " + std::to_string(agent_id) + " already placed");
  }
  if (!footprint_free(fp, center, kNoAgent)) {
    throw InvariantError("footprint for agent " + std::to_string(agent_id) +
                         " collides at row " + std::to_string(center.row) + " col " +
                         std::to_string(center.col));
  }
  for (const Footprint::RowSpan& rs : fp.spans) {
    const size_t base = linear({center.row + rs.dr, static_cast<int32_t>(center.col + rs.c0)});
    std::fill_n(occ_.begin() + base, rs.c1 - rs.c0 + 1, agent_id);
  }
  placements_[agent_id] = {&fp, center};
}

void Grid::remove_footprint(int32_t agent_id) {
  auto it = placements_.find(agent_id);
  if (it == placements_.end()) {
    throw InvariantError("agent " + std::to_string(agent_id) + " has no placement");
  }
  const Placement& p = it->second;
  for (const Footprint::RowSpan& rs : p.fp->spans) {
    const size_t base = linear({p.center.row + rs.dr, static_cast<int32_t>(p.center.col + rs.c0)});
    for (int32_t i = 0; i <= rs.c1 - rs.c0; ++i) {
      if (occ_[base + i] != agent_id) {
        throw InvariantError("occupancy corrupt while removing agent " +
                             std::to_string(agent_id));
      }
      occ_[base + i] = kCellEmpty;
    }
  }
  placements_.erase(it);
}

void Grid::audit() const {
  std::vector<int32_t> expect(occ_.size(), kCellEmpty);
  for (size_t i = 0; i < occ_.size(); ++i) {
    if (occ_[i] == kCellObstacle) expect[i] = kCellObstacle;
  }
  for (const auto& [id, p] : placements_) {
    for (const Footprint::RowSpan& rs : p.fp->spans) {
      const size_t base =
          linear({p.center.row + rs.dr, static_cast<int32_t>(p.center.col + rs.c0)});
      for (int32_t i = 0; i <= rs.c1 - rs.c0; ++i) {
        if (expect[base + i] != kCellEmpty) {
          throw InvariantError("audit: cell claimed twice (agent " + std::to_string(id) + ")");
        }
        expect[base + i] = id;
      }
    }
  }
  for (size_t i = 0; i < occ_.size(); ++i) {
    if (occ_[i] != expect[i]) {
      throw InvariantError("audit: occupancy mismatch at cell " + std::to_string(i) +
                           " (have " + std::to_string(occ_[i]) + ", expect " +
                           std::to_string(expect[i]) + ")");
    }
  }
}

std::vector<GridIndex> Grid::occupied_cells(int32_t agent_id) const {
  auto it = placements_.find(agent_id);
  if (it == placements_.end()) return {};
  std::vector<GridIndex> out;
  for (const Footprint::RowSpan& rs : it->second.fp->spans) {
    for (int16_t c = rs.c0; c <= rs.c1; ++c) {
      out.push_back({it->second.center.row + rs.dr, it->second.center.col + c});
    }
  }
  return out;
}

DistanceField compute_distance_field(const Grid& grid, const std::string& target_name) {
  const int32_t tid = grid.target_id(target_name);
  DistanceField f;
  f.target_name = target_name;
  f.rows = grid.rows();
  f.cols = grid.cols();
  f.dist.assign(static_cast<size_t>(f.rows) * f.cols, kUnreachable);

  using Node = std::pair<double, size_t>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> heap;
  for (GridIndex c : grid.target_cells(tid)) {
    f.dist[grid.linear(c)] = 0.0;
    heap.emplace(0.0, grid.linear(c));
  }
  while (!heap.empty()) {
    auto [d, idx] = heap.top();
    heap.pop();
    if (d > f.dist[idx]) continue;
    const GridIndex cur{static_cast<int32_t>(idx / f.cols), static_cast<int32_t>(idx % f.cols)};
    for (const DirInfo& dir : kDirs) {
      const GridIndex nb{cur.row + dir.dr, cur.col + dir.dc};
      if (!grid.in_bounds(nb) || grid.is_obstacle(nb)) continue;
      const double nd = d + dir.step_cost;
      const size_t ni = grid.linear(nb);
      if (nd < f.dist[ni]) {
        f.dist[ni] = nd;
        heap.emplace(nd, ni);
      }
    }
  }
  return f;
}

}  // namespace finegrid
