#include "finegrid/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "finegrid/errors.hpp"
#include "finegrid/snapshot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace finegrid {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key '" + ctx + it.key() + "'");
  }
}

double get_number(const json& j, const char* key, double fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError("key '" + ctx + key + "' must be a number");
  return j.at(key).get<double>();
}

RectM parse_rect(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("'" + ctx + "' must be an object");
  check_keys(j, {"x", "y", "w", "h"}, ctx + ".");
  RectM r;
  for (const char* k : {"x", "y", "w", "h"}) {
    if (!j.contains(k)) throw ConfigError("key '" + ctx + "." + k + "' is required");
  }
  r.x = get_number(j, "x", 0.0, ctx + ".");
  r.y = get_number(j, "y", 0.0, ctx + ".");
  r.w = get_number(j, "w", 0.0, ctx + ".");
  r.h = get_number(j, "h", 0.0, ctx + ".");
  return r;
}

ShapeSpec parse_shape(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("'" + ctx + "' must be an object");
  check_keys(j, {"kind", "width_m", "length_m"}, ctx + ".");
  ShapeSpec s;
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw ConfigError("key '" + ctx + ".kind' must be \"rect\" or \"ellipse\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rect") {
    s.kind = ShapeSpec::Kind::Rect;
  } else if (kind == "ellipse") {
    s.kind = ShapeSpec::Kind::Ellipse;
  } else {
    throw ConfigError("key '" + ctx + ".kind' must be \"rect\" or \"ellipse\"");
  }
  s.width_m = get_number(j, "width_m", 0.0, ctx + ".");
  s.length_m = get_number(j, "length_m", 0.0, ctx + ".");
  if (s.width_m <= 0.0 || s.length_m <= 0.0) {
    throw ConfigError("'" + ctx + "' dimensions must be positive");
  }
  return s;
}

DensitySpeedCurve parse_curve(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("'" + ctx + "' must be an object");
  check_keys(j, {"samples", "stall_density"}, ctx + ".");
  if (!j.contains("samples") || !j.at("samples").is_array()) {
    throw ConfigError("key '" + ctx + ".samples' must be an array of [density, speed] pairs");
  }
  DensitySpeedCurve c;
  for (const json& row : j.at("samples")) {
    if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
      throw ConfigError("key '" + ctx + ".samples' must be an array of [density, speed] pairs");
    }
    c.samples.emplace_back(row[0].get<double>(), row[1].get<double>());
  }
  if (!j.contains("stall_density")) {
    throw ConfigError("key '" + ctx + ".stall_density' is required");
  }
  c.stall_density = get_number(j, "stall_density", 0.0, ctx + ".");
  c.validate();
  return c;
}

fs::path resolve_outdir(const ScenarioConfig& cfg) {
  if (const char* env = std::getenv("FINEGRID_OUTDIR"); env && *env) return env;
  return cfg.output_dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << content;
  f.flush();
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

std::string flow_csv(const RunMetrics& m) {
  std::string out = "t0_s,t1_s,crossings,flow_per_m_s\n";
  const double t1 = m.duration_s;
  for (double w0 = m.warmup_s; w0 < t1 - 1e-9; w0 += 60.0) {
    const double w1 = std::min(w0 + 60.0, t1);
    uint64_t n = 0;
    for (const Crossing& c : m.flow_line.crossings()) {
      if (c.time > w0 && c.time <= w1) ++n;
    }
    const double flow = static_cast<double>(n) / (w1 - w0) / m.flow_line.width_m();
    out += fmt(w0) + "," + fmt(w1) + "," + std::to_string(n) + "," + fmt(flow) + "\n";
  }
  return out;
}

std::string density_speed_csv(const RunMetrics& m) {
  std::string out = "time_s,agent_id,profile,density_per_m2,speed_m_s\n";
  for (const DensitySpeedSample& s : m.samples) {
    out += fmt(s.time) + "," + std::to_string(s.agent_id) + "," +
           m.profile_names[s.profile_index] + "," + fmt(s.density) + "," + fmt(s.speed) + "\n";
  }
  return out;
}

std::string summary_csv(const RunSummary& s, const RunMetrics& m) {
  std::string out = "metric,value\n";
  const auto row = [&out](const std::string& key, const std::string& val) {
    out += key + "," + val + "\n";
  };
  row("mean_flow", fmt(s.mean_flow));
  row("peak_flow_60s", fmt(s.peak_flow_60s));
  row("crossings", std::to_string(s.crossings));
  row("duplicate_crossings", std::to_string(m.flow_line.duplicates_ignored()));
  row("spawned", std::to_string(s.spawned));
  row("exited", std::to_string(s.exited));
  row("queue_total", std::to_string(s.queue.total_queued));
  row("queue_max", std::to_string(s.queue.max_length));
  row("queue_mean", fmt(s.queue.mean_length));
  for (const auto& [name, n] : s.profile_crossings) {
    row("crossings[" + name + "]", std::to_string(n));
  }
  for (const DensityBin& b : s.bins) {
    row("bin_mean_speed[" + fmt(b.lo) + "]", fmt(b.mean_speed));
    row("bin_count[" + fmt(b.lo) + "]", std::to_string(b.count));
  }
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (width_m <= 0.0) throw ConfigError("corridor.width_m must be positive");
  if (length_m <= 0.0) throw ConfigError("corridor.length_m must be positive");
  if (arrival_rate < 0.0) throw ConfigError("source.rate_per_s must be >= 0");
  if (mixture.empty()) throw ConfigError("source.mixture must not be empty");
  double sum = 0.0;
  for (const auto& [name, ratio] : mixture) {
    if (ratio < 0.0 || ratio > 1.0) {
      throw ConfigError("source.mixture ratio for '" + name + "' must be in [0, 1]");
    }
    sum += ratio;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("source.mixture ratios must sum to 1");
  if (source_depth_m <= 0.0) throw ConfigError("source.depth_m must be positive");
  if (target_depth_m <= 0.0) throw ConfigError("target_depth_m must be positive");
  if (source_depth_m + target_depth_m >= length_m) {
    throw ConfigError("source and target strips do not fit the corridor length");
  }
  if (!(lambda > 0.0 && lambda < 0.1)) throw ConfigError("lambda must satisfy 0 < lambda < 0.1");
  if (duration_s <= warmup_s) throw ConfigError("duration_s must exceed warmup_s");
  if (warmup_s < 0.0) throw ConfigError("warmup_s must be >= 0");
  const double line = flow_line_position();
  if (line <= 0.0 || line >= length_m) {
    throw ConfigError("flow_line_m must lie strictly inside the corridor");
  }
}

ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j,
             {"corridor", "obstacles", "source", "curve_family", "lambda", "seed", "tick_s",
              "duration_s", "warmup_s", "flow_line_m", "target_depth_m", "output_dir",
              "profiles"},
             "");

  ScenarioConfig cfg;
  if (j.contains("corridor")) {
    const json& c = j.at("corridor");
    if (!c.is_object()) throw ConfigError("'corridor' must be an object");
    check_keys(c, {"width_m", "length_m"}, "corridor.");
    cfg.width_m = get_number(c, "width_m", cfg.width_m, "corridor.");
    cfg.length_m = get_number(c, "length_m", cfg.length_m, "corridor.");
  }
  if (j.contains("obstacles")) {
    const json& obs = j.at("obstacles");
    if (!obs.is_array()) throw ConfigError("'obstacles' must be an array");
    for (size_t i = 0; i < obs.size(); ++i) {
      cfg.obstacles.push_back(parse_rect(obs[i], "obstacles[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("source")) {
    const json& s = j.at("source");
    if (!s.is_object()) throw ConfigError("'source' must be an object");
    check_keys(s, {"rate_per_s", "mixture", "depth_m"}, "source.");
    cfg.arrival_rate = get_number(s, "rate_per_s", cfg.arrival_rate, "source.");
    cfg.source_depth_m = get_number(s, "depth_m", cfg.source_depth_m, "source.");
    if (s.contains("mixture")) {
      const json& mix = s.at("mixture");
      if (!mix.is_object() || mix.empty()) {
        throw ConfigError("'source.mixture' must be a non-empty object of name: ratio");
      }
      cfg.mixture.clear();
      for (const auto& [name, val] : mix.items()) {
        if (!val.is_number()) {
          throw ConfigError("key 'source.mixture." + name + "' must be a number");
        }
        cfg.mixture.emplace_back(name, val.get<double>());
      }
    }
  }
  if (j.contains("curve_family")) {
    if (!j.at("curve_family").is_string()) {
      throw ConfigError("key 'curve_family' must be \"weidmann\" or \"fruin\"");
    }
    cfg.family = curve_family_from_name(j.at("curve_family").get<std::string>());
  }
  cfg.lambda = get_number(j, "lambda", cfg.lambda, "");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<int64_t>() < 0) {
      throw ConfigError("key 'seed' must be a non-negative integer");
    }
    cfg.seed = j.at("seed").get<uint64_t>();
  }
  if (j.contains("tick_s") && get_number(j, "tick_s", kTickSeconds, "") != kTickSeconds) {
    throw ConfigError("tick_s must be exactly 0.025");
  }
  cfg.duration_s = get_number(j, "duration_s", cfg.duration_s, "");
  cfg.warmup_s = get_number(j, "warmup_s", cfg.warmup_s, "");
  cfg.flow_line_m = get_number(j, "flow_line_m", cfg.flow_line_m, "");
  cfg.target_depth_m = get_number(j, "target_depth_m", cfg.target_depth_m, "");
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("key 'output_dir' must be a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("profiles")) {
    const json& profs = j.at("profiles");
    if (!profs.is_object()) throw ConfigError("'profiles' must be an object");
    for (const auto& [name, body] : profs.items()) {
      const std::string ctx = "profiles." + name;
      if (!body.is_object()) throw ConfigError("'" + ctx + "' must be an object");
      check_keys(body, {"shape", "free_flow_speed_m_s", "curve"}, ctx + ".");
      ProfileOverride ov;
      if (body.contains("shape")) ov.shape = parse_shape(body.at("shape"), ctx + ".shape");
      if (body.contains("free_flow_speed_m_s")) {
        ov.free_flow_speed = get_number(body, "free_flow_speed_m_s", 0.0, ctx + ".");
      }
      if (body.contains("curve")) ov.curve = parse_curve(body.at("curve"), ctx + ".curve");
      cfg.profile_overrides[name] = std::move(ov);
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<EntityProfile> build_profiles(const ScenarioConfig& cfg) {
  std::vector<EntityProfile> out = {
      builtin_profile(ProfileKind::Pedestrian, cfg.family),
      builtin_profile(ProfileKind::AssistedWheelchair, cfg.family),
      builtin_profile(ProfileKind::NonAssistedWheelchair, cfg.family),
  };
  const DensitySpeedCurve base = builtin_curve(cfg.family);
  for (const auto& [name, ov] : cfg.profile_overrides) {
    EntityProfile* p = nullptr;
    for (EntityProfile& e : out) {
      if (e.name == name) p = &e;
    }
    if (p == nullptr) {
      if (!ov.shape || (!ov.free_flow_speed && !ov.curve)) {
        throw ConfigError("profile '" + name +
                          "' needs a shape and a free_flow_speed_m_s or curve");
      }
      out.emplace_back();
      p = &out.back();
      p->name = name;
    }
    if (ov.shape) {
      p->shape = *ov.shape;
      p->body = rasterize_body_map(*ov.shape);
    }
    if (ov.curve) {
      p->curve = *ov.curve;
      p->free_flow_speed = p->curve.free_flow_speed();
      if (ov.free_flow_speed &&
          std::abs(*ov.free_flow_speed - p->free_flow_speed) > 1e-9) {
        throw ConfigError("profile '" + name +
                          "': free_flow_speed_m_s disagrees with the curve intercept");
      }
    } else if (ov.free_flow_speed) {
      p->curve = scale_curve(base, *ov.free_flow_speed);
      p->free_flow_speed = *ov.free_flow_speed;
    }
    p->validate();
  }
  return out;
}

Simulation build_simulation(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::vector<NamedRect> targets = {
      {"exit", {0.0, cfg.length_m - cfg.target_depth_m, cfg.width_m, cfg.target_depth_m}}};
  Grid grid = Grid::build(cfg.width_m, cfg.length_m, cfg.obstacles, targets);

  EngineConfig ec;
  ec.lambda = cfg.lambda;
  ec.rng_seed = cfg.seed;
  ec.duration_s = cfg.duration_s;
  ec.warmup_s = cfg.warmup_s;

  Simulation sim(std::move(grid), build_profiles(cfg), "exit", ec);

  SourceSpec src;
  src.strip = {0.0, 0.0, cfg.width_m, cfg.source_depth_m};
  src.arrival_rate = cfg.arrival_rate;
  src.mixture = cfg.mixture;
  sim.add_source(src);
  sim.set_flow_line(cfg.flow_line_position(), cfg.width_m);
  return sim;
}

RunSummary run_scenario(const ScenarioConfig& cfg) {
  Simulation sim = build_simulation(cfg);
  const fs::path outdir = resolve_outdir(cfg);
  fs::create_directories(outdir);
  try {
    sim.run();
  } catch (const InvariantError& e) {
    std::string dump = "invariant violation\n";
    dump += std::string("message: ") + e.what() + "\n";
    dump += "time_s: " + fmt(sim.now()) + "\n";
    dump += "tick: " + std::to_string(sim.tick_count()) + "\n";
    dump += "agents_in_grid: " + std::to_string(sim.agents().size()) + "\n";
    dump += "spawned: " + std::to_string(sim.spawned()) + "\n";
    dump += "exited: " + std::to_string(sim.exited()) + "\n";
    dump += "queued: " + std::to_string(sim.queue_length()) + "\n";
    write_file(outdir / "invariant_dump.txt", dump);
    throw;
  }
  const RunMetrics m = sim.take_metrics();
  RunSummary s = summarize(m);
  write_file(outdir / "flow.csv", flow_csv(m));
  write_file(outdir / "density_speed.csv", density_speed_csv(m));
  write_file(outdir / "summary.csv", summary_csv(s, m));
  return s;
}

SweepResult batch_sweep(const ScenarioConfig& cfg, const std::vector<double>& ratios,
                        const std::string& wheelchair_profile, int seeds_per_point) {
  if (seeds_per_point < 1) throw ConfigError("seeds_per_point must be >= 1");
  for (const double r : ratios) {
    if (r < 0.0 || r > 1.0) throw ConfigError("sweep ratios must lie in [0, 1]");
  }
  SweepResult res;
  for (const double ratio : ratios) {
    double sum_mean = 0.0;
    double sum_peak = 0.0;
    int ok = 0;
    for (int s = 0; s < seeds_per_point; ++s) {
      ScenarioConfig c = cfg;
      c.mixture = {{"pedestrian", 1.0 - ratio}, {wheelchair_profile, ratio}};
      c.seed = cfg.seed + static_cast<uint64_t>(s);
      SweepRow row;
      row.ratio = ratio;
      row.seed = c.seed;
      try {
        Simulation sim = build_simulation(c);
        sim.run();
        const RunSummary sum = summarize(sim.take_metrics());
        row.ok = true;
        row.mean_flow = sum.mean_flow;
        row.peak_flow_60s = sum.peak_flow_60s;
        sum_mean += sum.mean_flow;
        sum_peak += sum.peak_flow_60s;
        ++ok;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      res.rows.push_back(row);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.mean_flow_by_ratio.emplace_back(ratio, ok > 0 ? sum_mean / ok : nan);
    res.peak_flow_by_ratio.emplace_back(ratio, ok > 0 ? sum_peak / ok : nan);
  }

  std::string out = "ratio,seed,mean_flow,peak_flow_60s\n";
  for (const SweepRow& r : res.rows) {
    out += fmt(r.ratio) + "," + std::to_string(r.seed) + ",";
    out += r.ok ? fmt(r.mean_flow) : "nan";
    out += ",";
    out += r.ok ? fmt(r.peak_flow_60s) : "nan";
    out += "\n";
  }
  for (size_t i = 0; i < res.mean_flow_by_ratio.size(); ++i) {
    out += fmt(res.mean_flow_by_ratio[i].first) + ",mean," +
           fmt(res.mean_flow_by_ratio[i].second) + "," + fmt(res.peak_flow_by_ratio[i].second) +
           "\n";
  }
  const fs::path outdir = resolve_outdir(cfg);
  fs::create_directories(outdir);
  write_file(outdir / "sweep.csv", out);
  return res;
}

void snapshot_scenario(const ScenarioConfig& cfg, double at_s) {
  if (at_s < 0.0) throw ConfigError("snapshot time must be >= 0");
  ScenarioConfig c = cfg;
  c.warmup_s = 0.0;
  c.duration_s = std::max(at_s, 1.0);
  Simulation sim = build_simulation(c);
  const auto ticks = static_cast<int64_t>(std::llround(at_s / kTickSeconds));
  for (int64_t i = 0; i < ticks; ++i) sim.step();
  const fs::path outdir = resolve_outdir(cfg);
  fs::create_directories(outdir);
  render_snapshot(sim, (outdir / "snapshot.ppm").string(), (outdir / "snapshot.txt").string());
}

}  // namespace finegrid
