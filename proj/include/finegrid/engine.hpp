#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "finegrid/geometry.hpp"
#include "finegrid/grid.hpp"
#include "finegrid/kernels.hpp"
#include "finegrid/metrics.hpp"
#include "finegrid/profiles.hpp"
#include "finegrid/rng.hpp"

namespace finegrid {

struct EngineConfig {
  double tick_s = kTickSeconds;  // fixed; anything else is rejected
  double lambda = 0.05;          // transition-rank Poisson parameter, 0 < lambda < 0.1
  double perception_depth_m = 2.0;
  double perception_halfwidth_m = -1.0;  // < 0: footprint halfwidth + 0.5
  int32_t density_refresh_ticks = 10;
  uint64_t rng_seed = 1;
  double duration_s = 1500.0;
  double warmup_s = 100.0;

  void validate() const;  // throws ConfigError
};

struct SourceSpec {
  RectM strip;  // inflow region, meters
  double arrival_rate = 0.0;  // entities/s
  std::vector<std::pair<std::string, double>> mixture;  // (profile name, ratio)

  void validate() const;  // throws ConfigError
};

struct Agent {
  int32_t id = -1;
  int32_t profile_index = 0;
  GridIndex center;
  // Heading: direction of steepest distance decrease, recomputed after each
  // actual move. Picks the body map and the perception band.
  Dir dir = kNorth;
  int32_t target_id = 0;
  int32_t desired_speed_cells = 0;  // 0..40
  double move_credit = 0.0;         // cells
  double perceived_density = 0.0;
  double spawn_time = 0.0;
  double exit_time = -1.0;  // < 0 while in grid

  // Path length per tick (m) over the trailing second, for realized speed.
  std::array<float, 40> path_ring{};
  int32_t ring_filled = 0;

  double realized_speed() const;
};

// Transition scores of the 8 Moore neighbors: M_i = n_i / R_i, where R_i is
// the distance-field value at neighbor i and n_i is 1 iff the agent's
// current-heading footprint fits there (own cells ignored). Free
// target-region neighbors (R_i = 0) come back as +infinity; blocked or
// out-of-bounds neighbors as 0.
std::array<double, 8> transition_scores(const Grid& grid, const DistanceField& field,
                                        const BodyMap& body, const Agent& agent);

struct MoveChoice {
  bool wait = true;
  Dir dir = kEast;
};

// Pick the next cell. A free, affordable target neighbor is taken
// deterministically (cheapest step first). Otherwise candidates with
// positive score and affordable step cost are ranked by score (ties
// rng-shuffled, straight steps ahead of diagonals at equal score) and the
// rank is drawn from Poisson(lambda), clamped to the last candidate.
MoveChoice select_next_cell(const std::array<double, 8>& scores, double move_credit,
                            double lambda, Rng& rng);

// Density perceived ahead: other-agent centers inside the band of the given
// depth and halfwidth starting at the agent's front edge, divided by the
// band's area clipped to the grid (floor 0.25 m^2).
double perceive_density(const kernels::KernelTable& kt, const int32_t* center_rows,
                        const int32_t* center_cols, size_t count, size_t self_index,
                        GridIndex center, Dir dir, double front_offset_m, double halfwidth_m,
                        double depth_m, double grid_width_m, double grid_height_m);

// Quantize the curve speed at the given density to whole cells/s.
int32_t adapt_speed(const DensitySpeedCurve& curve, double density);

// The tick loop: spawning, speed adaptation, movement, exits, metrics.
class Simulation {
 public:
  Simulation(Grid grid, std::vector<EntityProfile> profiles, const std::string& target_name,
             const EngineConfig& config);

  void add_source(const SourceSpec& source);
  void set_flow_line(double position_m, double width_m);

  // Direct placement (bypasses sources). Throws ConfigError if the profile
  // is unknown or the footprint does not fit.
  int32_t add_agent(const std::string& profile_name, GridIndex center);

  void step();  // one 0.025 s tick
  void run();   // duration_s worth of ticks + final audit

  double now() const { return static_cast<double>(tick_) * kTickSeconds; }
  int64_t tick_count() const { return tick_; }
  const Grid& grid() const { return grid_; }
  const DistanceField& field() const { return field_; }
  const std::vector<EntityProfile>& profiles() const { return profiles_; }
  const std::vector<Agent>& agents() const { return agents_; }
  const std::vector<Agent>& exited_agents() const { return exited_agents_; }
  const Agent* find_agent(int32_t id) const;  // in grid or exited
  Agent* mutable_agent(int32_t id);           // in-grid only; test hook
  size_t queue_length() const { return pending_.size(); }
  std::vector<int32_t> pending_profiles() const;  // test hook
  uint64_t spawned() const { return metrics_.spawned; }
  uint64_t exited() const { return metrics_.exited; }
  const RunMetrics& metrics() const { return metrics_; }
  RunMetrics take_metrics();

  // Grid + conservation audit; throws InvariantError. Runs automatically
  // every 100 ticks and at the end of run().
  void audit();

 private:
  struct PendingArrival {
    int32_t profile_index;
    size_t source_index;
    bool waited;
  };
  struct Source {
    SourceSpec spec;
    std::vector<int32_t> mixture_profiles;
    std::vector<double> mixture_cum;
    std::vector<GridIndex> strip_cells;
  };

  void spawn_tick();
  bool try_place(const PendingArrival& arrival);
  void rebuild_centers();
  void refresh_perception(Agent& a, size_t soa_index);
  Dir initial_direction(GridIndex cell) const;
  // Executes one step; returns path length in meters. Handles credit,
  // flow-line crossing, exit-on-target, and footprint relocation.
  double execute_move(Agent& a, Dir d, double t_now);

  Grid grid_;
  std::vector<EntityProfile> profiles_;
  EngineConfig cfg_;
  Rng rng_;
  DistanceField field_;
  int32_t target_id_ = 0;

  std::vector<Agent> agents_;
  std::vector<Agent> exited_agents_;
  std::deque<PendingArrival> pending_;
  std::vector<Source> sources_;
  int32_t next_agent_id_ = 0;
  int64_t tick_ = 0;

  bool flow_line_set_ = false;
  double flow_pos_m_ = 0.0;

  std::vector<int32_t> soa_rows_;
  std::vector<int32_t> soa_cols_;
  std::vector<size_t> order_;

  RunMetrics metrics_;
  uint64_t queue_len_accum_ = 0;
  int64_t queue_ticks_ = 0;
  double grid_w_m_ = 0.0;
  double grid_h_m_ = 0.0;
};

}  // namespace finegrid
