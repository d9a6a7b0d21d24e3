#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finegrid/engine.hpp"
#include "finegrid/metrics.hpp"
#include "finegrid/profiles.hpp"

namespace finegrid {

// Per-profile override from the config file: footprint shape, free-flow
// speed (curve rescaled accordingly) or a full custom sample table. New
// profile names need at least a shape and a speed or curve.
struct ProfileOverride {
  std::optional<ShapeSpec> shape;
  std::optional<double> free_flow_speed;
  std::optional<DensitySpeedCurve> curve;
};

// A corridor scenario. Defaults reproduce the reference experiment: 3 m x
// 20 m corridor, Weidmann family, saturating pedestrian inflow, 1500 s run
// with 100 s warmup, flow line at mid-length.
struct ScenarioConfig {
  double width_m = 3.0;
  double length_m = 20.0;
  std::vector<RectM> obstacles;
  double arrival_rate = 6.0;
  std::vector<std::pair<std::string, double>> mixture = {{"pedestrian", 1.0}};
  double source_depth_m = 2.0;
  double target_depth_m = 1.0;
  CurveFamily family = CurveFamily::Weidmann;
  double lambda = 0.05;
  uint64_t seed = 1;
  double duration_s = 1500.0;
  double warmup_s = 100.0;
  double flow_line_m = -1.0;  // < 0: length / 2
  std::string output_dir = "out";
  std::map<std::string, ProfileOverride> profile_overrides;

  double flow_line_position() const { return flow_line_m < 0.0 ? length_m / 2.0 : flow_line_m; }
  void validate() const;  // throws ConfigError
};

// Strict JSON loader: unknown keys, malformed values and constraint
// violations are ConfigErrors naming the offending key.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

// The three builtin profiles for the configured family, with overrides
// applied and any new profiles appended.
std::vector<EntityProfile> build_profiles(const ScenarioConfig& cfg);

// Grid + profiles + source + flow line, ready to run.
Simulation build_simulation(const ScenarioConfig& cfg);

// Full run: executes the engine, writes flow.csv, density_speed.csv and
// summary.csv into the output directory (FINEGRID_OUTDIR overrides it).
// Engine invariant violations write <outdir>/invariant_dump.txt and
// rethrow.
RunSummary run_scenario(const ScenarioConfig& cfg);

struct SweepRow {
  double ratio = 0.0;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mean_flow = 0.0;
  double peak_flow_60s = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;                    // one per (ratio, seed), ratio-major
  std::vector<std::pair<double, double>> mean_flow_by_ratio;
  std::vector<std::pair<double, double>> peak_flow_by_ratio;
};

// One run per (ratio, seed) with mixture {pedestrian: 1-r, profile: r} and
// seeds cfg.seed .. cfg.seed + seeds_per_point - 1; failures are recorded
// and the sweep continues. Writes sweep.csv (per-run rows plus per-ratio
// aggregate rows).
SweepResult batch_sweep(const ScenarioConfig& cfg, const std::vector<double>& ratios,
                        const std::string& wheelchair_profile, int seeds_per_point);

// Runs the scenario for at_s seconds, then renders <outdir>/snapshot.ppm
// and snapshot.txt.
void snapshot_scenario(const ScenarioConfig& cfg, double at_s);

}  // namespace finegrid
