#include "finegrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "finegrid/errors.hpp"

namespace finegrid {

bool FlowLine::record_crossing(int32_t agent_id, int32_t profile_index, double time) {
  if (!seen_.insert(agent_id).second) {
    ++duplicates_;
    return false;
  }
  crossings_.push_back({time, agent_id, profile_index});
  return true;
}

double measure_flow(const FlowLine& line, double t0, double t1) {
  if (t1 <= t0) throw ConfigError("flow window is empty");
  uint64_t n = 0;
  for (const Crossing& c : line.crossings()) {
    if (c.time > t0 && c.time <= t1) ++n;
  }
  return static_cast<double>(n) / (t1 - t0) / line.width_m();
}

RunSummary summarize(const RunMetrics& m) {
  RunSummary s;
  s.queue = m.queue;
  s.spawned = m.spawned;
  s.exited = m.exited;

  std::map<int64_t, std::pair<double, uint64_t>> bin_acc;
  for (const DensitySpeedSample& ds : m.samples) {
    const auto idx = static_cast<int64_t>(std::floor(ds.density / 0.25 + 1e-12));
    auto& [sum, cnt] = bin_acc[idx];
    sum += ds.speed;
    ++cnt;
  }
  for (const auto& [idx, acc] : bin_acc) {
    s.bins.push_back({idx * 0.25, acc.first / acc.second, acc.second});
  }

  const double t0 = m.warmup_s;
  const double t1 = m.duration_s;
  if (t1 <= t0) return s;

  std::vector<uint64_t> per_profile(m.profile_names.size(), 0);
  for (const Crossing& c : m.flow_line.crossings()) {
    if (c.time > t0 && c.time <= t1) {
      ++s.crossings;
      if (c.profile_index >= 0 && static_cast<size_t>(c.profile_index) < per_profile.size()) {
        ++per_profile[c.profile_index];
      }
    }
  }
  for (size_t i = 0; i < per_profile.size(); ++i) {
    s.profile_crossings.emplace_back(m.profile_names[i], per_profile[i]);
  }

  s.mean_flow = measure_flow(m.flow_line, t0, t1);

  const double window = std::min(60.0, t1 - t0);
  const auto& cr = m.flow_line.crossings();
  const int64_t steps = static_cast<int64_t>(std::floor(t1 - t0 - window + 1e-9));
  size_t lo = 0, hi = 0;
  for (int64_t i = 0; i <= steps; ++i) {
    const double w0 = t0 + static_cast<double>(i);
    const double w1 = w0 + window;
    while (lo < cr.size() && cr[lo].time <= w0) ++lo;
    while (hi < cr.size() && cr[hi].time <= w1) ++hi;
    const double flow = static_cast<double>(hi - lo) / window / m.flow_line.width_m();
    s.peak_flow_60s = std::max(s.peak_flow_60s, flow);
  }
  return s;
}

}  // namespace finegrid
