#include "finegrid/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "finegrid/errors.hpp"

namespace finegrid {

namespace {

constexpr double kCreditEps = 1e-9;

struct P2 {
  double x, y;
};

// Sutherland-Hodgman clip of a convex quad to [0,W]x[0,H], then shoelace.
double clipped_area(std::array<P2, 4> quad, double w, double h) {
  std::array<P2, 16> buf_a;
  std::array<P2, 16> buf_b;
  size_t n = 4;
  std::copy(quad.begin(), quad.end(), buf_a.begin());
  P2* in = buf_a.data();
  P2* out = buf_b.data();

  const auto clip_pass = [&](auto inside, auto cut) {
    size_t m = 0;
    for (size_t i = 0; i < n; ++i) {
      const P2& a = in[i];
      const P2& b = in[(i + 1) % n];
      const bool ia = inside(a);
      const bool ib = inside(b);
      if (ia) out[m++] = a;
      if (ia != ib) out[m++] = cut(a, b);
    }
    std::swap(in, out);
    n = m;
  };

  clip_pass([](const P2& p) { return p.x >= 0.0; },
            [](const P2& a, const P2& b) {
              const double t = (0.0 - a.x) / (b.x - a.x);
              return P2{0.0, a.y + t * (b.y - a.y)};
            });
  clip_pass([w](const P2& p) { return p.x <= w; },
            [w](const P2& a, const P2& b) {
              const double t = (w - a.x) / (b.x - a.x);
              return P2{w, a.y + t * (b.y - a.y)};
            });
  clip_pass([](const P2& p) { return p.y >= 0.0; },
            [](const P2& a, const P2& b) {
              const double t = (0.0 - a.y) / (b.y - a.y);
              return P2{a.x + t * (b.x - a.x), 0.0};
            });
  clip_pass([h](const P2& p) { return p.y <= h; },
            [h](const P2& a, const P2& b) {
              const double t = (h - a.y) / (b.y - a.y);
              return P2{a.x + t * (b.x - a.x), h};
            });

  double area2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const P2& a = in[i];
    const P2& b = in[(i + 1) % n];
    area2 += a.x * b.y - b.x * a.y;
  }
  return std::abs(area2) / 2.0;
}

}  // namespace

void EngineConfig::validate() const {
  if (tick_s != kTickSeconds) throw ConfigError("tick_s must be exactly 0.025");
  if (!(lambda > 0.0 && lambda < 0.1)) throw ConfigError("lambda must satisfy 0 < lambda < 0.1");
  if (perception_depth_m <= 0.0) throw ConfigError("perception_depth_m must be positive");
  if (density_refresh_ticks < 1) throw ConfigError("density_refresh_ticks must be >= 1");
  if (duration_s < 0.0) throw ConfigError("duration_s must be >= 0");
  if (warmup_s < 0.0) throw ConfigError("warmup_s must be >= 0");
}

void SourceSpec::validate() const {
  if (arrival_rate < 0.0) throw ConfigError("arrival_rate must be >= 0");
  if (mixture.empty()) throw ConfigError("mixture must not be empty");
  double sum = 0.0;
  for (const auto& [name, ratio] : mixture) {
    if (ratio < 0.0 || ratio > 1.0) {
      throw ConfigError("mixture ratio for '" + name + "' must be in [0, 1]");
    }
    sum += ratio;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mixture ratios must sum to 1");
}

double Agent::realized_speed() const {
  if (ring_filled <= 0) return 0.0;
  double sum = 0.0;
  for (const float v : path_ring) sum += v;
  return sum / (static_cast<double>(std::min(ring_filled, 40)) * kTickSeconds);
}

std::array<double, 8> transition_scores(const Grid& grid, const DistanceField& field,
                                        const BodyMap& body, const Agent& agent) {
  if (!grid.has_placement(agent.id)) {
    throw InvariantError("transition_scores: agent " + std::to_string(agent.id) +
                         " is not on the grid");
  }
  // Every candidate step keeps the current heading's footprint: entities
  // sidestep without swinging their body around. Reorientation happens
  // after a move, when the heading itself changes.
  const Footprint& fp = body.dir[agent.dir];
  std::array<double, 8> m{};
  for (int i = 0; i < 8; ++i) {
    const GridIndex nb{agent.center.row + kDirs[i].dr, agent.center.col + kDirs[i].dc};
    if (!grid.in_bounds(nb)) continue;
    const double r = field.at(nb);
    if (std::isinf(r)) continue;
    if (!grid.footprint_free(fp, nb, agent.id)) continue;
    m[i] = r == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / r;
  }
  return m;
}

MoveChoice select_next_cell(const std::array<double, 8>& scores, double move_credit,
                            double lambda, Rng& rng) {
  // Free target neighbor: taken outright, cheapest step first.
  int target = -1;
  for (int i = 0; i < 8; ++i) {
    if (!std::isinf(scores[i])) continue;
    if (kDirs[i].step_cost > move_credit + kCreditEps) continue;
    if (target < 0 || kDirs[i].step_cost < kDirs[target].step_cost) target = i;
  }
  if (target >= 0) return {false, static_cast<Dir>(target)};

  struct Cand {
    int dir;
    double score;
  };
  std::array<Cand, 8> cand;
  size_t n = 0;
  for (int i = 0; i < 8; ++i) {
    if (scores[i] > 0.0 && std::isfinite(scores[i]) &&
        kDirs[i].step_cost <= move_credit + kCreditEps) {
      cand[n++] = {i, scores[i]};
    }
  }
  if (n == 0) return {};
  if (n > 1) {
    rng.shuffle(std::span(cand.data(), n));
    std::stable_sort(cand.begin(), cand.begin() + n, [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      return kDirs[a.dir].step_cost < kDirs[b.dir].step_cost;
    });
  }
  const size_t k = static_cast<size_t>(rng.poisson(lambda));
  return {false, static_cast<Dir>(cand[std::min(k, n - 1)].dir)};
}

double perceive_density(const kernels::KernelTable& kt, const int32_t* center_rows,
                        const int32_t* center_cols, size_t count, size_t self_index,
                        GridIndex center, Dir dir, double front_offset_m, double halfwidth_m,
                        double depth_m, double grid_width_m, double grid_height_m) {
  const DirInfo& d = kDirs[dir];
  const double unit = d.diagonal ? kCellSize / kSqrt2 : kCellSize;

  kernels::BandQuery q;
  q.r0 = center.row;
  q.c0 = center.col;
  q.ax = d.dc;
  q.ay = d.dr;
  q.bx = -d.dr;
  q.by = d.dc;
  q.a_min = static_cast<int32_t>(std::floor(front_offset_m / unit + 1e-9)) + 1;
  q.a_max = static_cast<int32_t>(std::floor((front_offset_m + depth_m) / unit + 1e-9));
  q.c_max = static_cast<int32_t>(std::floor(halfwidth_m / unit + 1e-9));

  const int64_t inside = kt.count_in_band(center_rows, center_cols, count, self_index, q);

  const double cx = cell_center_x(center.col);
  const double cy = cell_center_y(center.row);
  const double wx = -d.uy;
  const double wy = d.ux;
  const double f = front_offset_m;
  const double g = front_offset_m + depth_m;
  const std::array<P2, 4> quad = {{
      {cx + d.ux * f + wx * halfwidth_m, cy + d.uy * f + wy * halfwidth_m},
      {cx + d.ux * f - wx * halfwidth_m, cy + d.uy * f - wy * halfwidth_m},
      {cx + d.ux * g - wx * halfwidth_m, cy + d.uy * g - wy * halfwidth_m},
      {cx + d.ux * g + wx * halfwidth_m, cy + d.uy * g + wy * halfwidth_m},
  }};
  const double area = std::max(clipped_area(quad, grid_width_m, grid_height_m), 0.25);
  return static_cast<double>(inside) / area;
}

int32_t adapt_speed(const DensitySpeedCurve& curve, double density) {
  const double v = curve.speed_at(density);
  const auto cells = static_cast<int32_t>(std::llround(v / kCellSize));
  return std::clamp(cells, 0, kMaxSpeedCells);
}

Simulation::Simulation(Grid grid, std::vector<EntityProfile> profiles,
                       const std::string& target_name, const EngineConfig& config)
    : grid_(std::move(grid)), profiles_(std::move(profiles)), cfg_(config), rng_(config.rng_seed) {
  cfg_.validate();
  if (profiles_.empty()) throw ConfigError("at least one profile is required");
  for (const EntityProfile& p : profiles_) p.validate();
  field_ = compute_distance_field(grid_, target_name);
  target_id_ = grid_.target_id(target_name);
  grid_w_m_ = grid_.cols() * kCellSize;
  grid_h_m_ = grid_.rows() * kCellSize;
  for (const EntityProfile& p : profiles_) metrics_.profile_names.push_back(p.name);
  metrics_.duration_s = cfg_.duration_s;
  metrics_.warmup_s = cfg_.warmup_s;
}

void Simulation::add_source(const SourceSpec& source) {
  source.validate();
  Source src;
  src.spec = source;
  double cum = 0.0;
  for (const auto& [name, ratio] : source.mixture) {
    int32_t idx = -1;
    for (size_t i = 0; i < profiles_.size(); ++i) {
      if (profiles_[i].name == name) idx = static_cast<int32_t>(i);
    }
    if (idx < 0) throw ConfigError("mixture references unknown profile '" + name + "'");
    cum += ratio;
    src.mixture_profiles.push_back(idx);
    src.mixture_cum.push_back(cum);
  }
  const RectM& s = source.strip;
  if (s.x < -1e-9 || s.y < -1e-9 || s.x + s.w > grid_w_m_ + 1e-9 ||
      s.y + s.h > grid_h_m_ + 1e-9) {
    throw ConfigError("source strip lies outside the grid");
  }
  for (int32_t r = 0; r < grid_.rows(); ++r) {
    for (int32_t c = 0; c < grid_.cols(); ++c) {
      if (grid_.is_obstacle({r, c})) continue;
      if (s.contains(cell_center_x(c), cell_center_y(r))) src.strip_cells.push_back({r, c});
    }
  }
  if (src.strip_cells.empty()) throw ConfigError("source strip covers no free cell");
  sources_.push_back(std::move(src));
}

void Simulation::set_flow_line(double position_m, double width_m) {
  metrics_.flow_line = FlowLine(position_m, width_m);
  flow_pos_m_ = position_m;
  flow_line_set_ = true;
}

Dir Simulation::initial_direction(GridIndex cell) const {
  int best = kNorth;
  double best_dist = std::numeric_limits<double>::infinity();
  double best_cost = 0.0;
  for (int i = 0; i < 8; ++i) {
    const GridIndex nb{cell.row + kDirs[i].dr, cell.col + kDirs[i].dc};
    if (!grid_.in_bounds(nb) || grid_.is_obstacle(nb)) continue;
    const double dist = field_.at(nb);
    if (std::isinf(dist)) continue;
    if (dist < best_dist - 1e-9 ||
        (dist < best_dist + 1e-9 && kDirs[i].step_cost < best_cost)) {
      best = i;
      best_dist = dist;
      best_cost = kDirs[i].step_cost;
    }
  }
  return static_cast<Dir>(best);
}

int32_t Simulation::add_agent(const std::string& profile_name, GridIndex center) {
  int32_t pidx = -1;
  for (size_t i = 0; i < profiles_.size(); ++i) {
    if (profiles_[i].name == profile_name) pidx = static_cast<int32_t>(i);
  }
  if (pidx < 0) throw ConfigError("unknown profile '" + profile_name + "'");
  if (!grid_.in_bounds(center)) throw ConfigError("agent center out of bounds");
  const Dir d = initial_direction(center);
  const EntityProfile& prof = profiles_[pidx];
  if (!grid_.footprint_free(prof.body.dir[d], center, kNoAgent)) {
    throw ConfigError("footprint does not fit at the requested cell");
  }
  Agent a;
  a.id = next_agent_id_++;
  a.profile_index = pidx;
  a.center = center;
  a.dir = d;
  a.target_id = target_id_;
  a.desired_speed_cells = adapt_speed(prof.curve, 0.0);
  a.spawn_time = now();
  grid_.place_footprint(a.id, prof.body.dir[d], center);
  agents_.push_back(a);
  ++metrics_.spawned;
  return a.id;
}

bool Simulation::try_place(const PendingArrival& arrival) {
  const Source& src = sources_[arrival.source_index];
  const EntityProfile& prof = profiles_[arrival.profile_index];
  for (int trial = 0; trial < 64; ++trial) {
    const GridIndex cell = src.strip_cells[rng_.below(src.strip_cells.size())];
    const Dir d = initial_direction(cell);
    if (!grid_.footprint_free(prof.body.dir[d], cell, kNoAgent)) continue;
    Agent a;
    a.id = next_agent_id_++;
    a.profile_index = arrival.profile_index;
    a.center = cell;
    a.dir = d;
    a.target_id = target_id_;
    a.desired_speed_cells = adapt_speed(prof.curve, 0.0);
    a.spawn_time = now();
    grid_.place_footprint(a.id, prof.body.dir[d], cell);
    agents_.push_back(a);
    return true;
  }
  return false;
}

void Simulation::spawn_tick() {
  for (size_t si = 0; si < sources_.size(); ++si) {
    Source& src = sources_[si];
    if (src.spec.arrival_rate <= 0.0) continue;
    const int arrivals = rng_.poisson(src.spec.arrival_rate * kTickSeconds);
    for (int i = 0; i < arrivals; ++i) {
      const double u = rng_.uniform();
      size_t pick = src.mixture_cum.size() - 1;
      for (size_t j = 0; j < src.mixture_cum.size(); ++j) {
        if (u < src.mixture_cum[j]) {
          pick = j;
          break;
        }
      }
      pending_.push_back({src.mixture_profiles[pick], si, false});
      ++metrics_.spawned;
    }
  }
  while (!pending_.empty() && try_place(pending_.front())) pending_.pop_front();
  for (PendingArrival& p : pending_) {
    if (!p.waited) {
      p.waited = true;
      ++metrics_.queue.total_queued;
    }
  }
  metrics_.queue.max_length = std::max<uint64_t>(metrics_.queue.max_length, pending_.size());
  queue_len_accum_ += pending_.size();
  ++queue_ticks_;
}

void Simulation::rebuild_centers() {
  soa_rows_.resize(agents_.size());
  soa_cols_.resize(agents_.size());
  for (size_t i = 0; i < agents_.size(); ++i) {
    soa_rows_[i] = agents_[i].center.row;
    soa_cols_[i] = agents_[i].center.col;
  }
}

void Simulation::refresh_perception(Agent& a, size_t soa_index) {
  const EntityProfile& p = profiles_[a.profile_index];
  const double hw = cfg_.perception_halfwidth_m >= 0.0 ? cfg_.perception_halfwidth_m
                                                       : p.halfwidth_m() + 0.5;
  a.perceived_density =
      perceive_density(kernels::active(), soa_rows_.data(), soa_cols_.data(), soa_rows_.size(),
                       soa_index, a.center, a.dir, p.front_offset_m(), hw,
                       cfg_.perception_depth_m, grid_w_m_, grid_h_m_);
  a.desired_speed_cells = adapt_speed(p.curve, a.perceived_density);
}

double Simulation::execute_move(Agent& a, Dir d, double t_now) {
  const DirInfo& di = kDirs[d];
  const GridIndex to{a.center.row + di.dr, a.center.col + di.dc};
  grid_.remove_footprint(a.id);
  a.move_credit -= di.step_cost;
  if (flow_line_set_) {
    const double y0 = cell_center_y(a.center.row);
    const double y1 = cell_center_y(to.row);
    if (y0 < flow_pos_m_ && y1 >= flow_pos_m_) {
      metrics_.flow_line.record_crossing(a.id, a.profile_index, t_now);
    }
  }
  a.center = to;
  if (grid_.target_id_at(to) == a.target_id) {
    a.exit_time = t_now;
    ++metrics_.exited;
  } else {
    const BodyMap& body = profiles_[a.profile_index].body;
    grid_.place_footprint(a.id, body.dir[a.dir], to);
    // The heading follows the distance field; the body turns with it as
    // soon as the turned footprint has room.
    const Dir heading = initial_direction(to);
    if (heading != a.dir && grid_.footprint_free(body.dir[heading], to, a.id)) {
      grid_.remove_footprint(a.id);
      grid_.place_footprint(a.id, body.dir[heading], to);
      a.dir = heading;
    }
  }
  return di.step_cost * kCellSize;
}

void Simulation::step() {
  const double t_end = static_cast<double>(tick_ + 1) * kTickSeconds;
  spawn_tick();
  rebuild_centers();
  order_.resize(agents_.size());
  std::iota(order_.begin(), order_.end(), size_t{0});
  rng_.shuffle(std::span(order_));

  const auto slot = static_cast<size_t>(tick_ % 40);
  for (const size_t idx : order_) {
    Agent& a = agents_[idx];
    if ((tick_ + a.id) % cfg_.density_refresh_ticks == 0) refresh_perception(a, idx);
    a.move_credit += a.desired_speed_cells * kTickSeconds;
    double moved_m = 0.0;
    while (a.move_credit + kCreditEps >= 1.0) {
      const auto scores = transition_scores(grid_, field_, profiles_[a.profile_index].body, a);
      const MoveChoice choice = select_next_cell(scores, a.move_credit, cfg_.lambda, rng_);
      if (choice.wait) {
        a.move_credit = std::min(a.move_credit, 1.0);
        break;
      }
      moved_m += execute_move(a, choice.dir, t_end);
      if (a.exit_time >= 0.0) break;
    }
    a.path_ring[slot] = static_cast<float>(moved_m);
    if (a.ring_filled < 40) ++a.ring_filled;
  }

  for (size_t i = agents_.size(); i-- > 0;) {
    if (agents_[i].exit_time >= 0.0) {
      exited_agents_.push_back(agents_[i]);
      if (i + 1 != agents_.size()) agents_[i] = agents_.back();
      agents_.pop_back();
    }
  }

  ++tick_;
  if (tick_ % 40 == 0 && now() > cfg_.warmup_s + 1e-9) {
    for (const Agent& a : agents_) {
      metrics_.samples.push_back(
          {now(), a.id, a.profile_index, a.perceived_density, a.realized_speed()});
    }
  }
  if (tick_ % 100 == 0) audit();
}

void Simulation::run() {
  const auto ticks = static_cast<int64_t>(std::llround(cfg_.duration_s / kTickSeconds));
  while (tick_ < ticks) step();
  audit();
  metrics_.queue.mean_length =
      queue_ticks_ > 0 ? static_cast<double>(queue_len_accum_) / queue_ticks_ : 0.0;
}

std::vector<int32_t> Simulation::pending_profiles() const {
  std::vector<int32_t> out;
  out.reserve(pending_.size());
  for (const auto& p : pending_) out.push_back(p.profile_index);
  return out;
}

void Simulation::audit() {
  grid_.audit();
  const uint64_t present = agents_.size();
  const uint64_t queued = pending_.size();
  if (metrics_.spawned != metrics_.exited + present + queued) {
    throw InvariantError("conservation violated: spawned " + std::to_string(metrics_.spawned) +
                         " != exited " + std::to_string(metrics_.exited) + " + present " +
                         std::to_string(present) + " + queued " + std::to_string(queued));
  }
  if (grid_.placement_count() != present) {
    throw InvariantError("placement count out of sync with agent list");
  }
  ++metrics_.audits;
}

const Agent* Simulation::find_agent(int32_t id) const {
  for (const Agent& a : agents_) {
    if (a.id == id) return &a;
  }
  for (const Agent& a : exited_agents_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

Agent* Simulation::mutable_agent(int32_t id) {
  for (Agent& a : agents_) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

RunMetrics Simulation::take_metrics() {
  metrics_.queue.mean_length =
      queue_ticks_ > 0 ? static_cast<double>(queue_len_accum_) / queue_ticks_ : 0.0;
  return std::move(metrics_);
}

}  // namespace finegrid
