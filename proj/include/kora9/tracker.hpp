#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "kora9/assignment.hpp"
#include "kora9/core.hpp"
#include "kora9/dbscan.hpp"
#include "kora9/sensor.hpp"

namespace kora9 {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kLosCorrectionLimitDeg = 75.0;
inline constexpr double kCorrectedSpeedCap = 60.0;

// Road-frame measurement built from one cluster.
struct Measurement {
  double s = 0.0;
  double d = 0.0;
  Mat2 position_cov = Mat2::Identity();
  double radial_velocity = 0.0;
  double line_of_sight_angle = 0.0;  // degrees between line of sight and the road axis, in [0, 90]
  double corrected_speed = 0.0;      // signed ground speed along +s when speed_valid
  bool speed_valid = false;
  double speed_variance = 0.0;
  double timestamp = 0.0;
  int sensor_id = 0;
};

// Converts a cluster centroid into the road frame and projects the radial
// velocity onto the road axis, assuming motion along the lanes.
inline Measurement cluster_to_measurement(const DetectionCluster& cluster, const SensorPose& pose,
                                          const SensorModel& model = {}) {
  Measurement m;
  m.timestamp = cluster.timestamp;
  m.sensor_id = cluster.sensor_id;
  m.radial_velocity = cluster.radial_velocity;
  const Point2 p = pose.to_road(cluster.range, cluster.azimuth);
  m.s = p.s;
  m.d = p.d;

  const double a = pose.heading() + deg2rad(cluster.azimuth);
  const double r = cluster.range;
  Mat2 jac;
  jac << std::cos(a), -r * std::sin(a), std::sin(a), r * std::cos(a);
  const double sr = std::max(model.sigma_range, 1e-3);
  const double sa = std::max(deg2rad(model.sigma_azimuth), 1e-5);
  const Mat2 polar = Eigen::Vector2d(sr * sr, sa * sa).asDiagonal();
  m.position_cov = jac * polar * jac.transpose();
  m.position_cov = 0.5 * (m.position_cov + m.position_cov.transpose()).eval();

  const double cos_axis = std::cos(a);  // LOS component along +s
  m.line_of_sight_angle = rad2deg(std::acos(std::min(1.0, std::abs(cos_axis))));
  m.corrected_speed = m.radial_velocity;
  if (m.line_of_sight_angle <= kLosCorrectionLimitDeg) {
    const double v = m.radial_velocity / cos_axis;
    if (std::abs(v) <= kCorrectedSpeedCap) {
      m.corrected_speed = v;
      m.speed_valid = true;
      const double sv = std::max(model.sigma_velocity, 1e-3);
      m.speed_variance = sv * sv / (cos_axis * cos_axis);
    }
  }
  return m;
}

enum class TrackStatus { tentative, confirmed, deleted };

inline std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::tentative: return "tentative";
    case TrackStatus::confirmed: return "confirmed";
    case TrackStatus::deleted: return "deleted";
  }
  return "tentative";
}

struct Track {
  std::uint64_t id = 0;
  int sensor_id = 0;
  Vec4 x = Vec4::Zero();  // (s, d, v_s, v_d)
  Mat4 P = Mat4::Identity();
  double plausibility = 0.0;
  int hits = 0;
  int misses = 0;  // consecutive
  std::uint32_t history = 0;  // bit 0 = latest cycle, 1 = hit
  TrackStatus status = TrackStatus::tentative;
  double last_update = 0.0;
};

struct TrackerConfig {
  double accel_psd_s = 1.0;  // m^2/s^3
  double accel_psd_d = 0.1;
  double gate = 3.0;  // Mahalanobis distance
  double init_speed = 0.5 * kMaxVehicleSpeed;  // centre of the 0..160 km/h range
  double init_speed_sigma = 12.8;
  double init_vd_variance = 0.25;
  int travel_direction = +1;
  int confirm_m = 3;
  int confirm_n = 4;
  int delete_misses = 4;
  double alpha = 0.3;
  double beta = 0.3;
  double min_plausibility = 0.05;
  bool lane_constrained = false;
  std::vector<double> lane_centers;  // used when lane_constrained

  void validate() const {
    if (!(gate > 0.0)) throw ConfigError("tracker.gate must be > 0");
    if (confirm_m < 1 || confirm_n < 1 || confirm_m > confirm_n || confirm_n > 32)
      throw ConfigError("tracker confirm M-of-N requires 1 <= M <= N <= 32");
    if (delete_misses < 1) throw ConfigError("tracker.delete_misses must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0))
      throw ConfigError("tracker alpha must be in (0,1], beta in [0,1]");
    if (!(accel_psd_s >= 0.0 && accel_psd_d >= 0.0)) throw ConfigError("tracker process noise must be >= 0");
    if (travel_direction != 1 && travel_direction != -1) throw ConfigError("tracker.travel_direction must be +1 or -1");
    if (lane_constrained && lane_centers.empty()) throw ConfigError("lane-constrained tracking needs lane centers");
  }
};

inline Mat4 cv_transition(double dt) {
  Mat4 f = Mat4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

// Discrete white-noise-acceleration covariance, one block per axis.
inline Mat4 cv_process_noise(double dt, double q_s, double q_d) {
  Mat4 q = Mat4::Zero();
  const double dt2 = dt * dt, dt3 = dt2 * dt;
  for (auto [pos, vel, psd] : {std::tuple{0, 2, q_s}, std::tuple{1, 3, q_d}}) {
    q(pos, pos) = psd * dt3 / 3.0;
    q(pos, vel) = q(vel, pos) = psd * dt2 / 2.0;
    q(vel, vel) = psd * dt;
  }
  return q;
}

inline void kf_predict(Vec4& x, Mat4& P, double dt, double q_s, double q_d) {
  if (dt == 0.0) return;
  const Mat4 f = cv_transition(dt);
  x = f * x;
  P = f * P * f.transpose() + cv_process_noise(dt, q_s, q_d);
  P = 0.5 * (P + P.transpose()).eval();
}

// Joseph-form update; returns the normalized innovation squared.
template <int M>
double kf_update(Vec4& x, Mat4& P, const Eigen::Matrix<double, M, 1>& z, const Eigen::Matrix<double, M, 4>& H,
                 const Eigen::Matrix<double, M, M>& R) {
  const Eigen::Matrix<double, M, 1> nu = z - H * x;
  const Eigen::Matrix<double, M, M> S = H * P * H.transpose() + R;
  const Eigen::LDLT<Eigen::Matrix<double, M, M>> ldlt(S);
  const Eigen::Matrix<double, 4, M> K = ldlt.solve(H * P).transpose();
  x += K * nu;
  const Mat4 ikh = Mat4::Identity() - K * H;
  P = ikh * P * ikh.transpose() + K * R * K.transpose();
  P = 0.5 * (P + P.transpose()).eval();
  return nu.dot(ldlt.solve(nu));
}

inline Track init_track(const Measurement& meas, const TrackerConfig& cfg) {
  Track t;
  t.sensor_id = meas.sensor_id;
  t.x << meas.s, meas.d, cfg.travel_direction * cfg.init_speed, 0.0;
  t.P.setZero();
  t.P.topLeftCorner<2, 2>() = meas.position_cov;
  t.P(2, 2) = cfg.init_speed_sigma * cfg.init_speed_sigma;
  if (meas.speed_valid) {
    t.x(2) = meas.corrected_speed;
    t.P(2, 2) = meas.speed_variance;
  }
  t.P(3, 3) = cfg.init_vd_variance;
  t.plausibility = cfg.alpha;
  t.hits = 1;
  t.history = 1;
  t.status = TrackStatus::tentative;
  t.last_update = meas.timestamp;
  return t;
}

inline double position_mahalanobis(const Track& t, const Measurement& m) {
  const Eigen::Vector2d nu(m.s - t.x(0), m.d - t.x(1));
  const Mat2 S = t.P.topLeftCorner<2, 2>() + m.position_cov;
  return std::sqrt(nu.dot(S.ldlt().solve(nu)));
}

// One sensor's multi-target tracker: CV Kalman filter, gated GNN association,
// M-of-N confirmation and an exponential hit/miss plausibility.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg, int sensor_id = 0) : cfg_(std::move(cfg)), sensor_id_(sensor_id) {
    cfg_.validate();
  }

  const TrackerConfig& config() const { return cfg_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  double last_time() const { return last_time_; }

  // Advances all tracks to t and ingests this cycle's measurements. The result
  // includes tracks deleted in this step (status deleted); they are dropped
  // from the tracker afterwards.
  std::vector<Track> step(std::span<const Measurement> meas, double t) {
    if (t < last_time_) throw ContractError("tracker time must be non-decreasing");
    last_time_ = t;
    for (auto& tr : tracks_) {
      kf_predict(tr.x, tr.P, t - tr.last_update, cfg_.accel_psd_s, cfg_.accel_psd_d);
      tr.last_update = t;
    }

    Eigen::MatrixXd cost(static_cast<Eigen::Index>(tracks_.size()), static_cast<Eigen::Index>(meas.size()));
    for (std::size_t i = 0; i < tracks_.size(); ++i)
      for (std::size_t j = 0; j < meas.size(); ++j)
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = position_mahalanobis(tracks_[i], meas[j]);
    const auto pairs = gated_assignment(cost, cfg_.gate);

    std::vector<char> track_hit(tracks_.size(), 0), meas_used(meas.size(), 0);
    for (auto [i, j] : pairs) {
      update(tracks_[static_cast<std::size_t>(i)], meas[static_cast<std::size_t>(j)]);
      track_hit[static_cast<std::size_t>(i)] = 1;
      meas_used[static_cast<std::size_t>(j)] = 1;
    }
    for (std::size_t i = 0; i < tracks_.size(); ++i)
      if (!track_hit[i]) register_miss(tracks_[i]);

    for (std::size_t j = 0; j < meas.size(); ++j) {
      if (meas_used[j]) continue;
      Track tr = init_track(meas[j], cfg_);
      tr.id = next_id_++;
      tr.sensor_id = sensor_id_;
      tr.last_update = t;
      constrain_to_lane(tr);
      tracks_.push_back(tr);
    }

    std::vector<Track> snapshot = tracks_;
    std::erase_if(tracks_, [](const Track& tr) { return tr.status == TrackStatus::deleted; });
    return snapshot;
  }

 private:
  void update(Track& tr, const Measurement& m) {
    if (m.speed_valid) {
      Eigen::Vector3d z(m.s, m.d, m.corrected_speed);
      Eigen::Matrix<double, 3, 4> h = Eigen::Matrix<double, 3, 4>::Zero();
      h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
      Eigen::Matrix3d r = Eigen::Matrix3d::Zero();
      r.topLeftCorner<2, 2>() = m.position_cov;
      r(2, 2) = m.speed_variance;
      kf_update<3>(tr.x, tr.P, z, h, r);
    } else {
      Eigen::Vector2d z(m.s, m.d);
      Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
      h(0, 0) = h(1, 1) = 1.0;
      kf_update<2>(tr.x, tr.P, z, h, m.position_cov);
    }
    constrain_to_lane(tr);
    tr.hits += 1;
    tr.misses = 0;
    tr.history = (tr.history << 1) | 1u;
    tr.plausibility = std::min(1.0, tr.plausibility + cfg_.alpha * (1.0 - tr.plausibility));
    if (tr.status == TrackStatus::tentative && std::popcount(tr.history & window_mask()) >= cfg_.confirm_m)
      tr.status = TrackStatus::confirmed;
  }

  void register_miss(Track& tr) {
    tr.misses += 1;
    tr.history <<= 1;
    tr.plausibility *= (1.0 - cfg_.beta);
    if (tr.misses >= cfg_.delete_misses || tr.plausibility < cfg_.min_plausibility) tr.status = TrackStatus::deleted;
  }

  // Lane-constrained mode keeps (s, v_s) and pins d to the nearest centerline.
  void constrain_to_lane(Track& tr) const {
    if (!cfg_.lane_constrained) return;
    const auto it = std::min_element(cfg_.lane_centers.begin(), cfg_.lane_centers.end(), [&](double a, double b) {
      return std::abs(a - tr.x(1)) < std::abs(b - tr.x(1));
    });
    tr.x(1) = *it;
    tr.x(3) = 0.0;
    for (int k : {1, 3}) {
      tr.P.row(k).setZero();
      tr.P.col(k).setZero();
    }
    tr.P(1, 1) = 0.01;
    tr.P(3, 3) = 0.01;
  }

  std::uint32_t window_mask() const {
    return cfg_.confirm_n >= 32 ? ~0u : ((1u << cfg_.confirm_n) - 1u);
  }

  TrackerConfig cfg_;
  int sensor_id_ = 0;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 1;
  double last_time_ = -std::numeric_limits<double>::infinity();
};

}  // namespace kora9
