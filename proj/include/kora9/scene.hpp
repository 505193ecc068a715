#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kora9/core.hpp"

namespace kora9 {

// Road frame: s runs along the travel direction, d is the lateral distance from
// the sensor line (d = 0). Lane 1 is the driving lane nearest to the sensors;
// the emergency lane, when present, lies between the sensor line and lane 1.
struct RoadSpec {
  double segment_length = 300.0;
  int lane_count = 3;
  double lane_width = 3.5;
  bool emergency_lane = true;

  void validate() const {
    if (!(segment_length > 0.0)) throw ConfigError("road.segment_length must be > 0");
    if (lane_count < 1) throw ConfigError("road.lane_count must be >= 1");
    if (!(lane_width > 0.0)) throw ConfigError("road.lane_width must be > 0");
  }

  double lane_offset() const { return emergency_lane ? lane_width : 0.0; }

  // Lane indices are 1-based.
  double lane_center(int lane) const { return lane_offset() + (lane - 0.5) * lane_width; }

  // Nearest lane centerline; clamps to [1, lane_count].
  int nearest_lane(double d) const {
    const int lane = static_cast<int>(std::floor((d - lane_offset()) / lane_width)) + 1;
    return std::clamp(lane, 1, lane_count);
  }

  double road_width() const { return lane_offset() + lane_count * lane_width; }
};

enum class VehicleClass { car, truck, truck_with_trailer };

inline std::string_view to_string(VehicleClass c) {
  switch (c) {
    case VehicleClass::car: return "car";
    case VehicleClass::truck: return "truck";
    case VehicleClass::truck_with_trailer: return "truck_with_trailer";
  }
  return "car";
}

struct Vehicle {
  std::uint64_t id = 0;
  VehicleClass cls = VehicleClass::car;
  double length = 4.5;
  double width = 1.8;
  double body_height = 1.5;
  double ground_clearance = 0.15;
  double base_rcs = 10.0;  // dBsm
  int lane_index = 1;
  double s = 0.0;  // center of the footprint
  double d = 0.0;  // lane centerline
  double speed = 0.0;

  double front() const { return s + 0.5 * length; }
  double rear() const { return s - 0.5 * length; }

  bool operator==(const Vehicle&) const = default;
};

// Body dimensions for a class. Truck-with-trailer length is drawn separately.
inline Vehicle vehicle_template(VehicleClass cls) {
  Vehicle v;
  v.cls = cls;
  if (cls == VehicleClass::car) return v;
  v.length = 14.0;
  v.width = 2.5;
  v.body_height = 4.0;
  v.ground_clearance = 0.4;
  v.base_rcs = 30.0;
  return v;
}

struct SpeedDistribution {
  double mean = 30.0;
  double sigma = 3.0;
};

struct LaneTraffic {
  double arrival_rate = 0.0;  // vehicles per second, Poisson
  double truck_fraction = 0.0;
  SpeedDistribution car_speed{};
  SpeedDistribution truck_speed{24.0, 2.0};
};

// A vehicle injected at a fixed time, used for fixtures and demos.
struct ScriptedVehicle {
  double spawn_time = 0.0;
  int lane = 1;
  VehicleClass cls = VehicleClass::car;
  double speed = 30.0;
  double s0 = 0.0;
  std::optional<double> length;
};

struct TrafficScenario {
  std::vector<LaneTraffic> lanes;  // index 0 is lane 1; missing lanes carry no traffic
  std::vector<ScriptedVehicle> scripted;
  double trailer_fraction = 0.3;  // share of trucks that carry a trailer
  double min_gap = 2.0;           // bumper-to-bumper gap enforced at spawn
  double duration = 120.0;
  double cycle_rate = 20.0;
  std::uint64_t seed = 0;

  void validate(const RoadSpec& road) const {
    if (!(cycle_rate > 0.0)) throw ConfigError("scenario.cycle_rate must be > 0");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("scenario.duration must be >= 0");
    if (static_cast<int>(lanes.size()) > road.lane_count)
      throw ConfigError("scenario.lanes has more entries than road.lane_count");
    if (trailer_fraction < 0.0 || trailer_fraction > 1.0)
      throw ConfigError("scenario.trailer_fraction must be in [0,1]");
    if (!(min_gap >= 0.0)) throw ConfigError("scenario.min_gap must be >= 0");
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      const auto& l = lanes[i];
      const std::string p = "scenario.lanes[" + std::to_string(i) + "]";
      if (!(l.arrival_rate >= 0.0) || !std::isfinite(l.arrival_rate)) throw ConfigError(p + ".arrival_rate must be >= 0");
      if (l.truck_fraction < 0.0 || l.truck_fraction > 1.0) throw ConfigError(p + ".truck_fraction must be in [0,1]");
      for (const auto* sd : {&l.car_speed, &l.truck_speed}) {
        if (!(sd->sigma >= 0.0)) throw ConfigError(p + " speed sigma must be >= 0");
        if (!std::isfinite(sd->mean)) throw ConfigError(p + " speed mean must be finite");
      }
    }
    for (std::size_t i = 0; i < scripted.size(); ++i) {
      const auto& sv = scripted[i];
      const std::string p = "scenario.scripted[" + std::to_string(i) + "]";
      if (sv.lane < 1 || sv.lane > road.lane_count) throw ConfigError(p + ".lane out of range");
      if (sv.speed < 0.0 || sv.speed > kMaxVehicleSpeed) throw ConfigError(p + ".speed must be in [0, 44.4] m/s");
      if (sv.spawn_time < 0.0) throw ConfigError(p + ".spawn_time must be >= 0");
      if (sv.length && (*sv.length < 3.0 || *sv.length > 20.0)) throw ConfigError(p + ".length must be in [3,20] m");
    }
  }
};

struct GroundTruthFrame {
  double timestamp = 0.0;
  std::vector<Vehicle> vehicles;

  bool operator==(const GroundTruthFrame&) const = default;
};

// Constant-velocity advance. Vehicles whose center passes the segment end are retired.
inline GroundTruthFrame propagate(const GroundTruthFrame& frame, double dt, const RoadSpec& road) {
  GroundTruthFrame out;
  out.timestamp = frame.timestamp + dt;
  out.vehicles.reserve(frame.vehicles.size());
  for (const auto& v : frame.vehicles) {
    Vehicle next = v;
    next.s = v.s + v.speed * dt;
    if (next.s <= road.segment_length) out.vehicles.push_back(next);
  }
  return out;
}

// The full ground-truth sequence of one traffic run.
struct GroundTruth {
  std::vector<GroundTruthFrame> frames;
  double cycle_rate = 20.0;
  double duration = 0.0;

  // Nearest earlier frame; exact at frame timestamps.
  const GroundTruthFrame& at(double t) const {
    if (!(t >= 0.0) || t > duration + 1e-12 || frames.empty())
      throw RangeError("ground truth requested outside [0, duration]");
    auto k = static_cast<std::size_t>(std::floor(t * cycle_rate + 1e-9));
    return frames[std::min(k, frames.size() - 1)];
  }
};

namespace detail {

inline double sample_speed(std::mt19937_64& rng, const SpeedDistribution& sd) {
  if (sd.sigma <= 0.0) return std::clamp(sd.mean, 0.0, kMaxVehicleSpeed);
  std::normal_distribution<double> n(sd.mean, sd.sigma);
  for (int i = 0; i < 100; ++i) {
    const double v = n(rng);
    if (v >= 0.0 && v <= kMaxVehicleSpeed) return v;
  }
  return std::clamp(sd.mean, 0.0, kMaxVehicleSpeed);
}

struct Spawn {
  double time;
  int lane;
  Vehicle vehicle;  // s holds the spawn position
};

}  // namespace detail

inline GroundTruth generate_traffic(const TrafficScenario& scenario, const RoadSpec& road) {
  road.validate();
  scenario.validate(road);

  std::vector<detail::Spawn> spawns;
  for (const auto& sv : scenario.scripted) {
    Vehicle v = vehicle_template(sv.cls);
    if (sv.length) v.length = *sv.length;
    else if (sv.cls == VehicleClass::truck_with_trailer) v.length = 18.0;
    v.lane_index = sv.lane;
    v.d = road.lane_center(sv.lane);
    v.s = sv.s0;
    v.speed = sv.speed;
    spawns.push_back({sv.spawn_time, sv.lane, v});
  }

  for (std::size_t li = 0; li < scenario.lanes.size(); ++li) {
    const auto& lt = scenario.lanes[li];
    if (lt.arrival_rate <= 0.0) continue;
    const int lane = static_cast<int>(li) + 1;
    auto rng = make_stream(scenario.seed, StreamTag::traffic, li);
    std::exponential_distribution<double> gap(lt.arrival_rate);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    double t = gap(rng);
    std::optional<detail::Spawn> leader;
    while (t <= scenario.duration) {
      VehicleClass cls = VehicleClass::car;
      if (u01(rng) < lt.truck_fraction)
        cls = u01(rng) < scenario.trailer_fraction ? VehicleClass::truck_with_trailer : VehicleClass::truck;
      Vehicle v = vehicle_template(cls);
      if (cls == VehicleClass::truck_with_trailer) v.length = 14.0 + 6.0 * u01(rng);
      v.speed = detail::sample_speed(rng, cls == VehicleClass::car ? lt.car_speed : lt.truck_speed);
      v.lane_index = lane;
      v.d = road.lane_center(lane);
      v.s = 0.0;

      double spawn_time = t;
      bool blocked = false;
      if (leader) {
        const auto& l = leader->vehicle;
        const double clearance = scenario.min_gap + 0.5 * (l.length + v.length);
        if (l.speed <= 0.0) {
          blocked = true;
        } else {
          spawn_time = std::max(spawn_time, leader->time + clearance / l.speed);
          // No overtaking: a faster follower adopts the leader's speed.
          v.speed = std::min(v.speed, l.speed);
        }
      }
      if (blocked || spawn_time > scenario.duration) break;
      detail::Spawn sp{spawn_time, lane, v};
      spawns.push_back(sp);
      leader = sp;
      t = spawn_time + gap(rng);
    }
  }

  std::stable_sort(spawns.begin(), spawns.end(), [](const auto& a, const auto& b) {
    return a.time != b.time ? a.time < b.time : a.lane < b.lane;
  });
  for (std::size_t i = 0; i < spawns.size(); ++i) spawns[i].vehicle.id = i + 1;

  GroundTruth gt;
  gt.cycle_rate = scenario.cycle_rate;
  gt.duration = scenario.duration;
  const auto n_frames = static_cast<std::size_t>(std::floor(scenario.duration * scenario.cycle_rate + 1e-9)) + 1;
  gt.frames.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    GroundTruthFrame f;
    f.timestamp = static_cast<double>(k) / scenario.cycle_rate;
    for (const auto& sp : spawns) {
      if (sp.time > f.timestamp + 1e-12) continue;
      Vehicle v = sp.vehicle;
      v.s = sp.vehicle.s + v.speed * (f.timestamp - sp.time);
      if (v.s > road.segment_length) continue;
      f.vehicles.push_back(v);
    }
    gt.frames.push_back(std::move(f));
  }
  return gt;
}

}  // namespace kora9
