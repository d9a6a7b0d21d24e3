#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

namespace finegrid {

struct Crossing {
  double time = 0.0;
  int32_t agent_id = -1;
  int32_t profile_index = 0;
};

// Transverse measurement line. Crossings are recorded once per agent
// traversal, in the forward direction only; repeat crossings caused by
// back-and-forth jitter are counted separately and ignored.
class FlowLine {
 public:
  FlowLine() = default;
  FlowLine(double position_m, double width_m) : position_m_(position_m), width_m_(width_m) {}

  double position_m() const { return position_m_; }
  double width_m() const { return width_m_; }

  bool record_crossing(int32_t agent_id, int32_t profile_index, double time);

  const std::vector<Crossing>& crossings() const { return crossings_; }
  uint64_t duplicates_ignored() const { return duplicates_; }

 private:
  double position_m_ = 0.0;
  double width_m_ = 1.0;
  std::vector<Crossing> crossings_;
  std::unordered_set<int32_t> seen_;
  uint64_t duplicates_ = 0;
};

// Crossings in (t0, t1] divided by window length and line width, (m*s)^-1.
// Throws ConfigError when t1 <= t0.
double measure_flow(const FlowLine& line, double t0, double t1);

struct DensitySpeedSample {
  double time = 0.0;
  int32_t agent_id = -1;
  int32_t profile_index = 0;
  double density = 0.0;  // perceived, entities/m^2
  double speed = 0.0;    // realized over trailing 1 s, m/s
};

struct QueueStats {
  uint64_t total_queued = 0;  // arrivals that waited at least one tick
  uint64_t max_length = 0;
  double mean_length = 0.0;  // over all ticks
};

// Raw per-run record filled by the engine.
struct RunMetrics {
  std::vector<std::string> profile_names;
  FlowLine flow_line;
  std::vector<DensitySpeedSample> samples;
  QueueStats queue;
  uint64_t spawned = 0;
  uint64_t exited = 0;
  uint64_t audits = 0;
  double duration_s = 0.0;
  double warmup_s = 0.0;
};

struct DensityBin {
  double lo = 0.0;  // bin is [lo, lo + 0.25)
  double mean_speed = 0.0;
  uint64_t count = 0;
};

struct RunSummary {
  double mean_flow = 0.0;
  double peak_flow_60s = 0.0;
  uint64_t crossings = 0;  // post-warmup
  std::vector<std::pair<std::string, uint64_t>> profile_crossings;
  std::vector<DensityBin> bins;  // ascending lo, width 0.25
  QueueStats queue;
  uint64_t spawned = 0;
  uint64_t exited = 0;
};

// Post-warmup aggregation: mean flow over (warmup, duration], peak flow as
// the max over 60 s windows slid in 1 s steps, density-speed means in
// 0.25-wide bins.
RunSummary summarize(const RunMetrics& m);

}  // namespace finegrid
