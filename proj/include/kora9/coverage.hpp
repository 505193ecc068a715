#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "kora9/core.hpp"
#include "kora9/scene.hpp"
#include "kora9/sensor.hpp"

namespace kora9 {

struct LayoutConfig {
  double pole_spacing = 45.0;
  int pole_count = 5;
  int sensors_per_pole = 2;  // 2: one upstream, one downstream; 1: downstream only
  double yaw = 15.0;
  double height = 1.3;
  double lateral_offset = 1.0;
  std::optional<double> first_pole_s;  // default: poles centred on the segment

  void validate() const {
    if (!(pole_spacing > 0.0)) throw ConfigError("layout.pole_spacing must be > 0");
    if (pole_count < 1) throw ConfigError("layout.pole_count must be >= 1");
    if (sensors_per_pole != 1 && sensors_per_pole != 2) throw ConfigError("layout.sensors_per_pole must be 1 or 2");
    if (!(height > 0.0)) throw ConfigError("layout.height must be > 0");
    if (!(std::abs(yaw) < 90.0)) throw ConfigError("layout.yaw must be in (-90,90)");
    if (!(lateral_offset >= 0.0)) throw ConfigError("layout.lateral_offset must be >= 0");
  }
};

struct PlacedSensor {
  int id = 0;
  SensorPose pose;
};

// Pole i carries sensor 2i+1 (upstream) and 2i+2 (downstream).
inline std::vector<PlacedSensor> place_sensors(const LayoutConfig& layout, const RoadSpec& road) {
  layout.validate();
  const double span = layout.pole_spacing * (layout.pole_count - 1);
  const double s0 = layout.first_pole_s.value_or(0.5 * (road.segment_length - span));
  std::vector<PlacedSensor> out;
  for (int i = 0; i < layout.pole_count; ++i) {
    SensorPose pose;
    pose.s_position = s0 + i * layout.pole_spacing;
    pose.lateral_offset = layout.lateral_offset;
    pose.height = layout.height;
    pose.yaw = layout.yaw;
    if (layout.sensors_per_pole == 2) {
      pose.facing = Facing::upstream;
      out.push_back({2 * i + 1, pose});
    }
    pose.facing = Facing::downstream;
    out.push_back({2 * i + 2, pose});
  }
  return out;
}

inline bool point_in_fov(const SensorPose& pose, const SensorModel& model, Point2 p) {
  const auto [r, az] = pose.to_polar(p);
  return r <= model.max_range && std::abs(az) <= 0.5 * model.azimuth_fov;
}

// Cells cover s in [0, L] and d in [0, road_width]. Rows are d cells, columns
// are s cells.
struct CoverageGrid {
  double cell = 1.0;
  std::size_t n_s = 0;
  std::size_t n_d = 0;
  std::vector<double> values;  // row-major, values[j * n_s + i]

  double s_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * cell; }
  double d_center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * cell; }
  double& at(std::size_t i, std::size_t j) { return values[j * n_s + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * n_s + i]; }
};

inline CoverageGrid make_grid(const RoadSpec& road, double cell) {
  if (!(cell > 0.0)) throw ContractError("grid cell size must be > 0");
  CoverageGrid g;
  g.cell = cell;
  g.n_s = static_cast<std::size_t>(std::ceil(road.segment_length / cell - 1e-9));
  g.n_d = static_cast<std::size_t>(std::ceil(road.road_width() / cell - 1e-9));
  g.values.assign(g.n_s * g.n_d, 0.0);
  return g;
}

inline CoverageGrid k_coverage_grid(std::span<const SensorPose> poses, const SensorModel& model, const RoadSpec& road,
                                    double cell) {
  auto g = make_grid(road, cell);
  for (std::size_t j = 0; j < g.n_d; ++j)
    for (std::size_t i = 0; i < g.n_s; ++i)
      for (const auto& p : poses)
        if (point_in_fov(p, model, {g.s_center(i), g.d_center(j)})) g.at(i, j) += 1.0;
  return g;
}

inline std::vector<SensorPose> poses_of(std::span<const PlacedSensor> sensors) {
  std::vector<SensorPose> out;
  for (const auto& s : sensors) out.push_back(s.pose);
  return out;
}

inline CoverageGrid k_coverage_grid(const LayoutConfig& layout, const SensorModel& model, const RoadSpec& road,
                                    double cell) {
  return k_coverage_grid(poses_of(place_sensors(layout, road)), model, road, cell);
}

struct LaneCompleteness {
  std::size_t vehicle_frames = 0;
  double at_least_one = 0.0;
  double at_least_two = 0.0;
};

struct CompletenessReport {
  std::vector<LaneCompleteness> lanes;  // index 0 = lane 1
  std::size_t vehicle_frames = 0;
  double at_least_one = 0.0;
  double at_least_two = 0.0;
  double mean_dwell = 0.0;  // seconds
  std::size_t dwell_runs = 0;
};

// Fraction of vehicle-frames whose scatter point is visible (FoV and
// occlusion, no SNR gate) to at least one and at least two sensors.
inline CompletenessReport completeness(std::span<const SensorPose> poses, const SensorModel& model,
                                       const GroundTruth& gt, const RoadSpec& road) {
  if (gt.frames.empty()) throw ContractError("completeness needs at least one frame");
  CompletenessReport rep;
  rep.lanes.resize(static_cast<std::size_t>(road.lane_count));
  std::vector<std::size_t> one(rep.lanes.size(), 0), two(rep.lanes.size(), 0);

  // Contiguous visibility runs per (vehicle, sensor).
  struct Run {
    std::size_t last_frame = 0;
    std::size_t length = 0;
  };
  std::map<std::pair<std::uint64_t, std::size_t>, Run> open;
  std::size_t run_frames = 0;

  for (std::size_t k = 0; k < gt.frames.size(); ++k) {
    const auto& frame = gt.frames[k];
    std::map<std::uint64_t, int> seen;
    for (std::size_t si = 0; si < poses.size(); ++si) {
      for (const auto& vt : visible_set(poses[si], model, frame)) {
        ++seen[vt.vehicle.id];
        const auto key = std::pair{vt.vehicle.id, si};
        auto it = open.find(key);
        if (it != open.end() && it->second.last_frame + 1 == k) {
          it->second.last_frame = k;
          ++it->second.length;
        } else {
          if (it != open.end()) {
            run_frames += it->second.length;
            ++rep.dwell_runs;
          }
          open[key] = Run{k, 1};
        }
      }
    }
    for (const auto& v : frame.vehicles) {
      const auto lane = static_cast<std::size_t>(std::clamp(v.lane_index, 1, road.lane_count) - 1);
      ++rep.lanes[lane].vehicle_frames;
      const auto it = seen.find(v.id);
      const int n = it == seen.end() ? 0 : it->second;
      if (n >= 1) ++one[lane];
      if (n >= 2) ++two[lane];
    }
  }
  for (const auto& [key, run] : open) {
    run_frames += run.length;
    ++rep.dwell_runs;
  }

  std::size_t tot1 = 0, tot2 = 0;
  for (std::size_t l = 0; l < rep.lanes.size(); ++l) {
    auto& lc = rep.lanes[l];
    if (lc.vehicle_frames > 0) {
      lc.at_least_one = static_cast<double>(one[l]) / static_cast<double>(lc.vehicle_frames);
      lc.at_least_two = static_cast<double>(two[l]) / static_cast<double>(lc.vehicle_frames);
    }
    rep.vehicle_frames += lc.vehicle_frames;
    tot1 += one[l];
    tot2 += two[l];
  }
  if (rep.vehicle_frames > 0) {
    rep.at_least_one = static_cast<double>(tot1) / static_cast<double>(rep.vehicle_frames);
    rep.at_least_two = static_cast<double>(tot2) / static_cast<double>(rep.vehicle_frames);
  }
  if (rep.dwell_runs > 0)
    rep.mean_dwell = static_cast<double>(run_frames) / static_cast<double>(rep.dwell_runs) / gt.cycle_rate;
  return rep;
}

inline CompletenessReport completeness(const LayoutConfig& layout, const SensorModel& model, const GroundTruth& gt,
                                       const RoadSpec& road) {
  return completeness(poses_of(place_sensors(layout, road)), model, gt, road);
}

struct SweepGrid {
  std::vector<double> spacings{45.0};
  std::vector<double> yaws{15.0};
  std::vector<double> heights{1.3};
  std::vector<int> pole_counts{5};
};

struct SweepRow {
  LayoutConfig layout;
  CompletenessReport report;
};

// Exhaustive evaluation, ranked by >=1 fraction then >=2 fraction. Ties keep
// grid order, so the ranking is independent of the worker count.
inline std::vector<SweepRow> layout_sweep(const SweepGrid& grid, const LayoutConfig& base, const SensorModel& model,
                                          const GroundTruth& gt, const RoadSpec& road, unsigned workers = 1) {
  std::vector<LayoutConfig> cands;
  for (int n : grid.pole_counts)
    for (double sp : grid.spacings)
      for (double yaw : grid.yaws)
        for (double h : grid.heights) {
          LayoutConfig c = base;
          c.pole_count = n;
          c.pole_spacing = sp;
          c.yaw = yaw;
          c.height = h;
          c.validate();
          cands.push_back(c);
        }
  if (cands.empty()) throw UsageError("layout sweep grid is empty");

  std::vector<SweepRow> rows(cands.size());
  const unsigned nw = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cands.size())));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < cands.size(); i += nw) rows[i] = {cands[i], completeness(cands[i], model, gt, road)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.report.at_least_one != b.report.at_least_one) return a.report.at_least_one > b.report.at_least_one;
    return a.report.at_least_two > b.report.at_least_two;
  });
  return rows;
}

// Log-scaled 2D histogram of road-frame positions: log10(1 + count).
inline CoverageGrid detection_heatmap(std::span<const Point2> points, const RoadSpec& road, double cell) {
  auto g = make_grid(road, cell);
  std::vector<double> counts(g.values.size(), 0.0);
  for (const auto& p : points) {
    if (!(p.s >= 0.0) || !(p.d >= 0.0)) continue;
    const auto i = static_cast<std::size_t>(p.s / cell);
    const auto j = static_cast<std::size_t>(p.d / cell);
    if (i >= g.n_s || j >= g.n_d) continue;
    counts[j * g.n_s + i] += 1.0;
  }
  for (std::size_t k = 0; k < counts.size(); ++k) g.values[k] = std::log10(1.0 + counts[k]);
  return g;
}

// Sum of heatmap cells whose centre lies inside the lane.
inline double lane_mass(const CoverageGrid& g, const RoadSpec& road, int lane) {
  const double lo = road.lane_offset() + (lane - 1) * road.lane_width;
  const double hi = lo + road.lane_width;
  double sum = 0.0;
  for (std::size_t j = 0; j < g.n_d; ++j) {
    const double d = g.d_center(j);
    if (d < lo || d >= hi) continue;
    for (std::size_t i = 0; i < g.n_s; ++i) sum += g.at(i, j);
  }
  return sum;
}

inline std::vector<Point2> detections_to_road(std::span<const TargetList> lists,
                                              const std::map<int, SensorPose>& poses) {
  std::vector<Point2> out;
  for (const auto& l : lists) {
    const auto it = poses.find(l.sensor_id);
    if (it == poses.end()) throw ConfigError("no pose known for sensor " + std::to_string(l.sensor_id));
    for (const auto& d : l.detections) out.push_back(it->second.to_road(d.range, d.azimuth));
  }
  return out;
}

}  // namespace kora9
