#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "kora9/core.hpp"
#include "kora9/scene.hpp"

namespace kora9 {

enum class Facing { upstream, downstream };

inline std::string_view to_string(Facing f) { return f == Facing::upstream ? "upstream" : "downstream"; }

struct Point2 {
  double s = 0.0;
  double d = 0.0;
};

// Mounting of one sensor. The sensor sits at (s_position, -lateral_offset) in
// the road frame; its boresight is turned yaw degrees from the road axis
// toward the road. Upstream sensors look at oncoming traffic.
struct SensorPose {
  double s_position = 0.0;
  double lateral_offset = 0.0;
  double height = 1.3;
  double yaw = 15.0;
  Facing facing = Facing::downstream;

  void validate() const {
    if (!(height > 0.0)) throw ConfigError("sensor pose height must be > 0");
    if (!(std::abs(yaw) < 90.0)) throw ConfigError("sensor pose |yaw| must be < 90 deg");
    if (!std::isfinite(s_position) || !std::isfinite(lateral_offset)) throw ConfigError("sensor pose must be finite");
  }

  Point2 position() const { return {s_position, -lateral_offset}; }

  // Boresight angle in the road frame, radians, counterclockwise from +s.
  double heading() const {
    const double y = deg2rad(yaw);
    return facing == Facing::downstream ? y : std::numbers::pi - y;
  }

  // Sensor polar (range, azimuth in degrees) to road frame.
  Point2 to_road(double range, double azimuth_deg) const {
    const double a = heading() + deg2rad(azimuth_deg);
    return {s_position + range * std::cos(a), -lateral_offset + range * std::sin(a)};
  }

  // Road frame to sensor polar: {range, azimuth in degrees}.
  std::pair<double, double> to_polar(Point2 p) const {
    const double ds = p.s - s_position;
    const double dd = p.d + lateral_offset;
    return {std::hypot(ds, dd), rad2deg(wrap_pi(std::atan2(dd, ds) - heading()))};
  }
};

struct SensorModel {
  double azimuth_fov = 30.0;       // total beam width, degrees
  double max_range = 127.9114;     // unambiguous range of the default waveform
  double snr_ref = 15.0;           // dB for 0 dBsm at range_ref
  double range_ref = 100.0;
  double detection_threshold = 10.0;
  double sigma_range = 0.25;
  double sigma_velocity = 0.2;
  double sigma_azimuth = 0.5;  // degrees
  double cycle_rate = 20.0;
  bool aspect_rcs = true;

  void validate() const {
    if (!(azimuth_fov > 0.0 && azimuth_fov < 180.0)) throw ConfigError("sensor.azimuth_fov must be in (0,180)");
    if (!(max_range > 0.0)) throw ConfigError("sensor.max_range must be > 0");
    if (!(range_ref > 0.0)) throw ConfigError("sensor.range_ref must be > 0");
    if (!(sigma_range >= 0.0 && sigma_velocity >= 0.0 && sigma_azimuth >= 0.0))
      throw ConfigError("sensor sigmas must be >= 0");
    if (!(cycle_rate > 0.0)) throw ConfigError("sensor.cycle_rate must be > 0");
  }
};

// RCS swing over aspect: 0 dB at head-on, broadside and tail-on, -30 dB at the
// oblique minima (45 and 135 degrees).
inline constexpr double kRcsAspectSwingDb = 30.0;

inline double rcs_aspect_modulation(double aspect_deg) {
  return -0.5 * kRcsAspectSwingDb * (1.0 - std::cos(4.0 * deg2rad(aspect_deg)));
}

inline double rcs_of(const Vehicle& v, double aspect_deg) {
  if (!(aspect_deg >= 0.0 && aspect_deg <= 180.0)) throw ContractError("aspect angle must be in [0,180] deg");
  return v.base_rcs + rcs_aspect_modulation(aspect_deg);
}

struct VisibleTarget {
  Vehicle vehicle;
  Point2 scatter;
  double scatter_height = 0.0;
  double aspect_angle = 0.0;  // degrees, 0 = head-on
  double range = 0.0;
  double azimuth = 0.0;  // degrees in sensor frame
};

namespace detail {

// Liang-Barsky clip of p0->p1 against an axis-aligned rectangle. Returns the
// parameter interval inside the rectangle, if any.
inline std::optional<std::pair<double, double>> clip_segment(Point2 p0, Point2 p1, double s_lo, double s_hi,
                                                             double d_lo, double d_hi) {
  double t0 = 0.0, t1 = 1.0;
  const double ds = p1.s - p0.s;
  const double dd = p1.d - p0.d;
  const double p[4] = {-ds, ds, -dd, dd};
  const double q[4] = {p0.s - s_lo, s_hi - p0.s, p0.d - d_lo, d_hi - p0.d};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) t0 = std::max(t0, r);
    else t1 = std::min(t1, r);
    if (t0 > t1) return std::nullopt;
  }
  return std::pair{t0, t1};
}

}  // namespace detail

// True when `occluder` blocks the ray from the sensor to the scatter point.
inline bool blocks_ray(const Vehicle& occluder, Point2 sensor, double sensor_height, Point2 scatter,
                       double scatter_height) {
  const auto hit = detail::clip_segment(sensor, scatter, occluder.rear(), occluder.front(),
                                        occluder.d - 0.5 * occluder.width, occluder.d + 0.5 * occluder.width);
  if (!hit) return false;
  const auto [t0, t1] = *hit;
  const double z0 = sensor_height + (scatter_height - sensor_height) * t0;
  const double z1 = sensor_height + (scatter_height - sensor_height) * t1;
  const double lo = std::min(z0, z1);
  const double hi = std::max(z0, z1);
  return hi >= occluder.ground_clearance && lo <= occluder.ground_clearance + occluder.body_height;
}

inline VisibleTarget scatter_geometry(const SensorPose& pose, const Vehicle& v) {
  VisibleTarget vt;
  vt.vehicle = v;
  const bool sensor_ahead = pose.s_position > v.s;
  vt.scatter = {sensor_ahead ? v.front() : v.rear(), v.d};
  vt.scatter_height = 0.5 * v.body_height;
  const auto [r, az] = pose.to_polar(vt.scatter);
  vt.range = r;
  vt.azimuth = az;
  const Point2 sp = pose.position();
  const double us = (vt.scatter.s - sp.s) / std::max(r, 1e-12);
  // Heading is +s, so the head-on cosine is the dot product with -LOS.
  vt.aspect_angle = rad2deg(std::acos(std::clamp(-us, -1.0, 1.0)));
  return vt;
}

inline bool in_field_of_view(const SensorModel& model, const VisibleTarget& vt) {
  return vt.range <= model.max_range && std::abs(vt.azimuth) <= 0.5 * model.azimuth_fov;
}

inline std::vector<VisibleTarget> visible_set(const SensorPose& pose, const SensorModel& model,
                                              const GroundTruthFrame& frame) {
  std::vector<VisibleTarget> out;
  const Point2 sp = pose.position();
  for (const auto& v : frame.vehicles) {
    auto vt = scatter_geometry(pose, v);
    if (!in_field_of_view(model, vt)) continue;
    const bool occluded = std::any_of(frame.vehicles.begin(), frame.vehicles.end(), [&](const Vehicle& o) {
      return o.id != v.id && blocks_ray(o, sp, pose.height, vt.scatter, vt.scatter_height);
    });
    if (!occluded) out.push_back(std::move(vt));
  }
  return out;
}

struct TargetDetection {
  double range = 0.0;
  double radial_velocity = 0.0;  // positive = receding
  double azimuth = 0.0;          // degrees
  double snr = 0.0;              // dB
  double timestamp = 0.0;
  int sensor_id = 0;

  bool operator==(const TargetDetection&) const = default;
};

struct TargetList {
  int sensor_id = 0;
  double timestamp = 0.0;
  std::vector<TargetDetection> detections;

  bool operator==(const TargetList&) const = default;
};

inline double snr_at(const SensorModel& model, double rcs_dbsm, double range) {
  return model.snr_ref + rcs_dbsm - 40.0 * std::log10(std::max(range, 1e-3) / model.range_ref);
}

inline TargetList generate_target_list(const SensorPose& pose, const SensorModel& model, const GroundTruthFrame& frame,
                                       std::uint64_t seed, int sensor_id) {
  TargetList list;
  list.sensor_id = sensor_id;
  list.timestamp = frame.timestamp;
  const auto cycle = static_cast<std::uint64_t>(std::llround(frame.timestamp * model.cycle_rate));
  auto rng = make_stream(seed, StreamTag::target_list, (static_cast<std::uint64_t>(sensor_id) << 32) | cycle);
  std::normal_distribution<double> unit(0.0, 1.0);
  const Point2 sp = pose.position();

  for (const auto& vt : visible_set(pose, model, frame)) {
    const double rcs = model.aspect_rcs ? rcs_of(vt.vehicle, vt.aspect_angle) : vt.vehicle.base_rcs;
    const double snr = snr_at(model, rcs, vt.range);
    if (snr < model.detection_threshold) continue;
    const double us = (vt.scatter.s - sp.s) / std::max(vt.range, 1e-12);
    const double vr = vt.vehicle.speed * us;

    TargetDetection det;
    det.timestamp = frame.timestamp;
    det.sensor_id = sensor_id;
    det.snr = snr;
    det.range = std::clamp(vt.range + model.sigma_range * unit(rng), 0.0, model.max_range);
    det.radial_velocity = vr + model.sigma_velocity * unit(rng);
    det.azimuth = std::clamp(vt.azimuth + model.sigma_azimuth * unit(rng), -0.5 * model.azimuth_fov,
                             0.5 * model.azimuth_fov);
    list.detections.push_back(det);
  }
  return list;
}

}  // namespace kora9
