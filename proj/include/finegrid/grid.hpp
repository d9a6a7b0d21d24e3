#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finegrid/geometry.hpp"
#include "finegrid/profiles.hpp"

namespace finegrid {

inline constexpr int32_t kCellEmpty = -1;
inline constexpr int32_t kCellObstacle = -2;
inline constexpr int32_t kNoAgent = kCellEmpty;  // ignore-nobody sentinel
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct NamedRect {
  std::string name;
  RectM rect;
};

// Precomputed distance-to-target over free cells, 8-connected with diagonal
// cost sqrt(2), in cell units. Obstacles and unreachable cells hold +inf.
struct DistanceField {
  std::string target_name;
  int32_t rows = 0;
  int32_t cols = 0;
  std::vector<double> dist;

  double at(GridIndex c) const { return dist[static_cast<size_t>(c.row) * cols + c.col]; }
};

// The discrete movement space: a lattice of 5 cm cells with per-cell
// occupancy, an obstacle mask and named target regions. Multi-cell agent
// footprints are placed and tested through the span kernels.
class Grid {
 public:
  // width_m spans columns (x), height_m spans rows (y). Obstacle and target
  // rectangles are marked by cell-center inclusion.
  static Grid build(double width_m, double height_m, std::span<const RectM> obstacles,
                    std::span<const NamedRect> targets);

  int32_t rows() const { return rows_; }
  int32_t cols() const { return cols_; }
  bool in_bounds(GridIndex c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }
  size_t linear(GridIndex c) const { return static_cast<size_t>(c.row) * cols_ + c.col; }

  int32_t occupancy(GridIndex c) const { return occ_[linear(c)]; }
  bool is_obstacle(GridIndex c) const { return occ_[linear(c)] == kCellObstacle; }
  const int32_t* occupancy_data() const { return occ_.data(); }

  // Target lookup. target_id_at returns -1 for non-target cells.
  int32_t target_id(const std::string& name) const;
  int16_t target_id_at(GridIndex c) const { return target_id_[linear(c)]; }
  const std::vector<GridIndex>& target_cells(int32_t id) const { return target_cells_[id]; }
  const std::vector<std::string>& target_names() const { return target_names_; }

  // True iff every footprint cell is in bounds, non-obstacle, and either
  // free or occupied by ignore_agent (pass kNoAgent to ignore nobody).
  bool footprint_free(const Footprint& fp, GridIndex center, int32_t ignore_agent) const;

  // Occupancy mutation. place throws InvariantError if any cell is taken;
  // remove throws for an unknown agent. place-after-remove is the move.
  void place_footprint(int32_t agent_id, const Footprint& fp, GridIndex center);
  void remove_footprint(int32_t agent_id);

  bool has_placement(int32_t agent_id) const { return placements_.contains(agent_id); }
  size_t placement_count() const { return placements_.size(); }

  // Full-grid audit: every occupied cell belongs to exactly the footprint
  // that claims it and nothing else. Throws InvariantError on violation.
  void audit() const;

  // Test hook: cells currently claimed by one agent.
  std::vector<GridIndex> occupied_cells(int32_t agent_id) const;

 private:
  struct Placement {
    const Footprint* fp;
    GridIndex center;
  };

  int32_t rows_ = 0;
  int32_t cols_ = 0;
  std::vector<int32_t> occ_;
  std::vector<int16_t> target_id_;
  std::vector<std::string> target_names_;
  std::vector<std::vector<GridIndex>> target_cells_;
  std::unordered_map<int32_t, Placement> placements_;
};

// Multi-source shortest path from the named target region (Dijkstra over
// free cells, costs 1 and sqrt(2)). Throws ConfigError if the target region
// is empty.
DistanceField compute_distance_field(const Grid& grid, const std::string& target_name);

}  // namespace finegrid
