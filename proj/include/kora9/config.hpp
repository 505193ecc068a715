#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kora9/core.hpp"
#include "kora9/coverage.hpp"
#include "kora9/dbscan.hpp"
#include "kora9/fusion.hpp"
#include "kora9/interference.hpp"
#include "kora9/scene.hpp"
#include "kora9/sensor.hpp"
#include "kora9/tracker.hpp"
#include "kora9/waveform.hpp"

namespace kora9 {

struct TransportConfig {
  double min_latency = 0.005;  // s, sensor -> edge
  double max_latency = 0.08;

  void validate() const {
    if (!(min_latency >= 0.0) || !(max_latency >= min_latency))
      throw ConfigError("transport latency bounds must satisfy 0 <= min_latency <= max_latency");
  }
};

struct CoverageRunConfig {
  double cell = 1.0;
  SweepGrid sweep{{30.0, 45.0, 60.0, 90.0}, {10.0, 15.0, 20.0}, {1.3}, {5}};

  void validate() const {
    if (!(cell > 0.0)) throw ConfigError("coverage.cell must be > 0");
  }
};

struct HeatmapConfig {
  double cell = 1.0;
  std::string source = "detections";  // or "fused"

  void validate() const {
    if (!(cell > 0.0)) throw ConfigError("heatmap.cell must be > 0");
    if (source != "detections" && source != "fused") throw ConfigError("heatmap.source must be detections or fused");
  }
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned workers = 1;
  RoadSpec road;
  TrafficScenario scenario;
  WaveformConfig waveform;
  SensorModel sensor;
  LayoutConfig layout;
  ClusterParams cluster;
  TrackerConfig tracker;
  FusionConfig fusion;
  InterferenceSetup interference;
  TransportConfig transport;
  CoverageRunConfig coverage;
  HeatmapConfig heatmap;

  void validate() const {
    road.validate();
    scenario.validate(road);
    waveform.validate();
    sensor.validate();
    layout.validate();
    cluster.validate();
    tracker.validate();
    fusion.validate();
    interference.validate();
    transport.validate();
    coverage.validate();
    heatmap.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

namespace detail {

// Walks one JSON object, reading known keys and rejecting the rest. Every
// error names the full field path.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    read(*it, field(key), out);
  }

  template <class Fn>
  void object(const char* key, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    ObjectReader sub(*it, field(key));
    fn(sub);
    sub.finish();
  }

  template <class T, class Fn>
  void array(const char* key, std::vector<T>& out, Fn&& fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(field(key) + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      T item{};
      ObjectReader sub((*it)[i], field(key) + "[" + std::to_string(i) + "]");
      fn(sub, item);
      sub.finish();
      out.push_back(std::move(item));
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(field(k.c_str()) + ": unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string field(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

  static void read(const nlohmann::json& v, const std::string& p, double& out) {
    if (!v.is_number()) throw ConfigError(p + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(p + ": must be finite");
  }
  static void read(const nlohmann::json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) throw ConfigError(p + ": expected an integer");
    out = v.get<int>();
  }
  static void read(const nlohmann::json& v, const std::string& p, unsigned& out) {
    if (!v.is_number_unsigned()) throw ConfigError(p + ": expected a non-negative integer");
    out = v.get<unsigned>();
  }
  static void read(const nlohmann::json& v, const std::string& p, std::uint64_t& out) {
    if (!v.is_number_unsigned()) throw ConfigError(p + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const nlohmann::json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) throw ConfigError(p + ": expected a boolean");
    out = v.get<bool>();
  }
  static void read(const nlohmann::json& v, const std::string& p, std::string& out) {
    if (!v.is_string()) throw ConfigError(p + ": expected a string");
    out = v.get<std::string>();
  }
  static void read(const nlohmann::json& v, const std::string& p, std::optional<double>& out) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    double d = 0.0;
    read(v, p, d);
    out = d;
  }
  template <class T>
  static void read(const nlohmann::json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array()) throw ConfigError(p + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      read(v[i], p + "[" + std::to_string(i) + "]", item);
      out.push_back(item);
    }
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline VehicleClass vehicle_class_from_string(const std::string& s, const std::string& path) {
  if (s == "car") return VehicleClass::car;
  if (s == "truck") return VehicleClass::truck;
  if (s == "truck_with_trailer") return VehicleClass::truck_with_trailer;
  throw ConfigError(path + ": unknown vehicle class '" + s + "'");
}

inline void read_speed(ObjectReader& r, SpeedDistribution& sd) {
  r.get("mean", sd.mean);
  r.get("sigma", sd.sigma);
}

}  // namespace detail

// Propagates the global seed to the sections that carry their own copy.
inline void set_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.scenario.seed = seed;
  c.interference.seed = seed;
}

inline RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  detail::ObjectReader root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.get("workers", c.workers);
  root.object("road", [&](auto& r) {
    r.get("segment_length", c.road.segment_length);
    r.get("lane_count", c.road.lane_count);
    r.get("lane_width", c.road.lane_width);
    r.get("emergency_lane", c.road.emergency_lane);
  });
  root.object("scenario", [&](auto& r) {
    auto& s = c.scenario;
    r.get("duration", s.duration);
    r.get("cycle_rate", s.cycle_rate);
    r.get("trailer_fraction", s.trailer_fraction);
    r.get("min_gap", s.min_gap);
    r.array("lanes", s.lanes, [](auto& lr, LaneTraffic& lt) {
      lr.get("arrival_rate", lt.arrival_rate);
      lr.get("truck_fraction", lt.truck_fraction);
      lr.object("car_speed", [&](auto& sr) { detail::read_speed(sr, lt.car_speed); });
      lr.object("truck_speed", [&](auto& sr) { detail::read_speed(sr, lt.truck_speed); });
    });
    r.array("scripted", s.scripted, [](auto& sr, ScriptedVehicle& sv) {
      std::string cls = "car";
      sr.get("spawn_time", sv.spawn_time);
      sr.get("lane", sv.lane);
      sr.get("class", cls);
      sv.cls = detail::vehicle_class_from_string(cls, sr.path() + ".class");
      sr.get("speed", sv.speed);
      sr.get("s0", sv.s0);
      sr.get("length", sv.length);
    });
  });
  root.object("waveform", [&](auto& r) {
    auto& w = c.waveform;
    r.get("f0", w.f0);
    r.get("bw", w.bw);
    r.get("fs", w.fs);
    r.get("t_chirp", w.t_chirp);
    r.get("t_rep", w.t_rep);
    r.get("n_ramps", w.n_ramps);
    r.get("cycle_rate", w.cycle_rate);
    std::string win(to_string(w.window));
    r.get("window", win);
    const auto kind = window_from_string(win);
    if (!kind) throw ConfigError("waveform.window: unknown window '" + win + "'");
    w.window = *kind;
    r.get("configured_unambiguous_range", w.configured_unambiguous_range);
    r.get("configured_unambiguous_speed", w.configured_unambiguous_speed);
  });
  root.object("sensor", [&](auto& r) {
    auto& m = c.sensor;
    r.get("azimuth_fov", m.azimuth_fov);
    r.get("max_range", m.max_range);
    r.get("snr_ref", m.snr_ref);
    r.get("range_ref", m.range_ref);
    r.get("detection_threshold", m.detection_threshold);
    r.get("sigma_range", m.sigma_range);
    r.get("sigma_velocity", m.sigma_velocity);
    r.get("sigma_azimuth", m.sigma_azimuth);
    r.get("cycle_rate", m.cycle_rate);
    r.get("aspect_rcs", m.aspect_rcs);
  });
  root.object("layout", [&](auto& r) {
    auto& l = c.layout;
    r.get("pole_spacing", l.pole_spacing);
    r.get("pole_count", l.pole_count);
    r.get("sensors_per_pole", l.sensors_per_pole);
    r.get("yaw", l.yaw);
    r.get("height", l.height);
    r.get("lateral_offset", l.lateral_offset);
    r.get("first_pole_s", l.first_pole_s);
  });
  root.object("cluster", [&](auto& r) {
    r.get("eps_range", c.cluster.eps_range);
    r.get("eps_velocity", c.cluster.eps_velocity);
    r.get("min_pts", c.cluster.min_pts);
  });
  root.object("tracker", [&](auto& r) {
    auto& t = c.tracker;
    r.get("accel_psd_s", t.accel_psd_s);
    r.get("accel_psd_d", t.accel_psd_d);
    r.get("gate", t.gate);
    r.get("init_speed", t.init_speed);
    r.get("init_speed_sigma", t.init_speed_sigma);
    r.get("init_vd_variance", t.init_vd_variance);
    r.get("confirm_m", t.confirm_m);
    r.get("confirm_n", t.confirm_n);
    r.get("delete_misses", t.delete_misses);
    r.get("alpha", t.alpha);
    r.get("beta", t.beta);
    r.get("min_plausibility", t.min_plausibility);
    r.get("lane_constrained", t.lane_constrained);
  });
  root.object("fusion", [&](auto& r) {
    auto& f = c.fusion;
    r.get("reorder_window", f.reorder_window);
    r.get("gate", f.gate);
    r.get("history_bonus", f.history_bonus);
    r.get("history_cap", f.history_cap);
    r.get("stale_after", f.stale_after);
    r.get("contribution_timeout", f.contribution_timeout);
    r.get("beta", f.beta);
    r.get("epoch_rate", f.epoch_rate);
    r.get("merge_gap_max", f.merge_gap_max);
    r.get("merge_dv_max", f.merge_dv_max);
    r.get("max_object_length", f.max_object_length);
    r.get("length_margin", f.length_margin);
  });
  root.object("interference", [&](auto& r) {
    auto& s = c.interference;
    r.get("noise_sigma", s.noise_sigma);
    r.get("amplitude", s.amplitude);
    r.get("carrier_offset", s.carrier_offset);
    r.get("start_offset", s.start_offset);
    r.get("target_range_bin", s.target_range_bin);
    r.get("target_doppler_offset_bins", s.target_doppler_offset_bins);
    std::string win(to_string(s.victim.window));
    r.get("window", win);
    const auto kind = window_from_string(win);
    if (!kind) throw ConfigError("interference.window: unknown window '" + win + "'");
    s.victim.window = *kind;
  });
  root.object("transport", [&](auto& r) {
    r.get("min_latency", c.transport.min_latency);
    r.get("max_latency", c.transport.max_latency);
  });
  root.object("coverage", [&](auto& r) {
    r.get("cell", c.coverage.cell);
    r.object("sweep", [&](auto& sr) {
      sr.get("spacings", c.coverage.sweep.spacings);
      sr.get("yaws", c.coverage.sweep.yaws);
      sr.get("heights", c.coverage.sweep.heights);
      sr.get("pole_counts", c.coverage.sweep.pole_counts);
    });
  });
  root.object("heatmap", [&](auto& r) {
    r.get("cell", c.heatmap.cell);
    r.get("source", c.heatmap.source);
  });
  root.finish();

  // The interference victim shares the waveform section except for its window.
  const auto win = c.interference.victim.window;
  c.interference.victim = c.waveform;
  c.interference.victim.window = win;
  set_seed(c, c.seed);
  c.tracker.lane_centers.clear();
  for (int l = 1; l <= c.road.lane_count; ++l) c.tracker.lane_centers.push_back(c.road.lane_center(l));
  c.fusion.road = c.road;
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline RunConfig default_config() { return parse_config(nlohmann::json::object()); }

}  // namespace kora9
