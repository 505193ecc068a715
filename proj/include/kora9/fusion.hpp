#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "kora9/assignment.hpp"
#include "kora9/core.hpp"
#include "kora9/scene.hpp"
#include "kora9/sensor.hpp"
#include "kora9/tracker.hpp"

namespace kora9 {

// Rigid transform of a track from a sensor's Cartesian frame (x along the
// boresight, y to its left) into the road frame.
inline Track spatial_align(const Track& local, const SensorPose& pose) {
  const double h = pose.heading();
  const double c = std::cos(h), s = std::sin(h);
  Mat4 rot = Mat4::Zero();
  rot.topLeftCorner<2, 2>() << c, -s, s, c;
  rot.bottomRightCorner<2, 2>() = rot.topLeftCorner<2, 2>();
  Track out = local;
  out.x = rot * local.x;
  out.x(0) += pose.s_position;
  out.x(1) -= pose.lateral_offset;
  out.P = rot * local.P * rot.transpose();
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

inline Track spatial_align(const Track& local, const std::map<int, SensorPose>& poses) {
  const auto it = poses.find(local.sensor_id);
  if (it == poses.end()) throw ConfigError("no pose known for sensor " + std::to_string(local.sensor_id));
  return spatial_align(local, it->second);
}

namespace detail {

template <int N>
Eigen::Matrix<double, N, N> spd_inverse(const Eigen::Matrix<double, N, N>& p) {
  using M = Eigen::Matrix<double, N, N>;
  const M ident = M::Identity(p.rows(), p.cols());
  for (double reg : {0.0, 1e-9}) {
    const M q = p + reg * ident;
    Eigen::LLT<M> llt(q);
    if (llt.info() == Eigen::Success) {
      M inv = llt.solve(ident);
      if (inv.allFinite()) return 0.5 * (inv + inv.transpose());
    }
  }
  throw NumericError("covariance is singular after regularization");
}

}  // namespace detail

// Inverse-covariance weighting of two independent estimates.
template <int N>
std::pair<Eigen::Matrix<double, N, 1>, Eigen::Matrix<double, N, N>> fuse_states(
    const Eigen::Matrix<double, N, 1>& x1, const Eigen::Matrix<double, N, N>& P1,
    const Eigen::Matrix<double, N, 1>& x2, const Eigen::Matrix<double, N, N>& P2) {
  const auto i1 = detail::spd_inverse<N>(P1);
  const auto i2 = detail::spd_inverse<N>(P2);
  auto pf = detail::spd_inverse<N>(i1 + i2);
  Eigen::Matrix<double, N, 1> xf = pf * (i1 * x1 + i2 * x2);
  return {xf, pf};
}

struct SensorTrackMessage {
  int sensor_id = 0;
  double timestamp = 0.0;
  std::vector<Track> tracks;
};

struct FusedObject {
  std::uint64_t id = 0;
  Vec4 x = Vec4::Zero();
  Mat4 P = Mat4::Identity();
  double plausibility = 0.0;
  double length_estimate = 0.0;
  std::set<int> sensors;
  int lane_index = 1;
  double last_update = 0.0;
};

struct FusionConfig {
  double reorder_window = 0.15;
  double gate = 3.0;
  double history_bonus = 0.5;
  int history_cap = 5;
  double stale_after = 0.5;
  double contribution_timeout = 0.2;
  double beta = 0.3;
  double accel_psd_s = 1.0;
  double accel_psd_d = 0.1;
  double epoch_rate = 20.0;
  double merge_gap_max = 20.0;
  double merge_dv_max = 2.0;
  double max_object_length = 20.0;
  double length_margin = 1.0;
  RoadSpec road{};
  std::map<int, Facing> sensor_facing;  // provenance for long-object merging

  void validate() const {
    if (!(reorder_window > 0.0)) throw ConfigError("fusion.reorder_window must be > 0");
    if (!(gate > 0.0)) throw ConfigError("fusion.gate must be > 0");
    if (history_cap < 0 || history_bonus < 0.0) throw ConfigError("fusion history bonus/cap must be >= 0");
    if (!(stale_after > 0.0) || !(contribution_timeout > 0.0)) throw ConfigError("fusion timeouts must be > 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("fusion.beta must be in [0,1]");
    if (!(epoch_rate > 0.0)) throw ConfigError("fusion.epoch_rate must be > 0");
    if (!(merge_gap_max >= 0.0) || !(merge_dv_max >= 0.0)) throw ConfigError("fusion merge limits must be >= 0");
    if (!(max_object_length > 0.0) || !(length_margin >= 0.0)) throw ConfigError("fusion length limits invalid");
  }
};

struct FusionStats {
  std::size_t messages_processed = 0;
  std::size_t oosm_discarded = 0;
  std::size_t objects_spawned = 0;
  std::size_t objects_dropped = 0;
};

// Edge-side track-to-track fusion node. Messages are buffered and processed in
// timestamp order once they are older than the reorder window, so the output
// depends only on which messages arrived before each epoch, never on the order
// in which they arrived.
class FusionEngine {
 public:
  explicit FusionEngine(FusionConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const FusionConfig& config() const { return cfg_; }
  const FusionStats& stats() const { return stats_; }

  // Returns false when the message is too old to be processed (counted).
  bool submit(SensorTrackMessage msg) {
    if (msg.timestamp <= horizon_ + kTimeEps) {
      ++stats_.oosm_discarded;
      return false;
    }
    buffer_.push_back(std::move(msg));
    return true;
  }

  std::vector<FusedObject> epoch(double epoch_time) {
    if (epoch_time < last_epoch_) throw ContractError("fusion epochs must be non-decreasing");
    last_epoch_ = epoch_time;
    const double cutoff = epoch_time - cfg_.reorder_window;

    std::vector<SensorTrackMessage> ready;
    std::vector<SensorTrackMessage> later;
    for (auto& m : buffer_) (m.timestamp <= cutoff + kTimeEps ? ready : later).push_back(std::move(m));
    buffer_ = std::move(later);
    std::sort(ready.begin(), ready.end(), [](const auto& a, const auto& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.sensor_id < b.sensor_id;
    });

    epoch_contrib_.clear();
    for (const auto& m : ready) process(m);
    horizon_ = std::max(horizon_, cutoff);

    // Expire contributions and objects relative to the processed horizon.
    for (auto& obj : objects_) {
      std::erase_if(obj.contributions, [&](const auto& kv) {
        return kv.second.time < horizon_ - cfg_.contribution_timeout - kTimeEps;
      });
    }
    const auto before = objects_.size();
    std::erase_if(objects_, [&](const Internal& o) {
      return o.contributions.empty() || o.last_update < horizon_ - cfg_.stale_after - kTimeEps;
    });
    stats_.objects_dropped += before - objects_.size();

    std::vector<FusedObject> out;
    out.reserve(objects_.size());
    for (auto& obj : objects_) {
      const auto it = epoch_contrib_.find(obj.id);
      if (it != epoch_contrib_.end()) {
        double miss = 1.0;
        for (const auto& [sensor, pl] : it->second) miss *= (1.0 - std::clamp(pl, 0.0, 1.0));
        obj.plausibility = 1.0 - miss;
      } else {
        obj.plausibility *= (1.0 - cfg_.beta);
      }
      FusedObject f = combine(obj, epoch_time);
      out.push_back(std::move(f));
    }
    return out;
  }

  std::size_t buffered() const { return buffer_.size(); }

 private:
  static constexpr double kTimeEps = 1e-9;

  struct Contribution {
    std::uint64_t track_id = 0;
    Vec4 x = Vec4::Zero();
    Mat4 P = Mat4::Identity();
    double time = 0.0;
  };

  struct Internal {
    std::uint64_t id = 0;
    std::map<int, Contribution> contributions;  // per sensor
    double plausibility = 0.0;
    double last_update = 0.0;
  };

  struct HistoryEntry {
    std::uint64_t fused_id = 0;
    int count = 0;
  };

  FusedObject combine(const Internal& obj, double t) const {
    FusedObject f;
    f.id = obj.id;
    f.plausibility = obj.plausibility;
    f.last_update = obj.last_update;
    bool first = true;
    for (const auto& [sensor, c] : obj.contributions) {
      Vec4 x = c.x;
      Mat4 P = c.P;
      kf_predict(x, P, t - c.time, cfg_.accel_psd_s, cfg_.accel_psd_d);
      if (first) {
        f.x = x;
        f.P = P;
        first = false;
      } else {
        std::tie(f.x, f.P) = fuse_states<4>(f.x, f.P, x, P);
      }
      f.sensors.insert(sensor);
    }
    f.lane_index = cfg_.road.nearest_lane(f.x(1));
    return f;
  }

  void process(const SensorTrackMessage& msg) {
    ++stats_.messages_processed;
    std::vector<const Track*> tracks;
    for (const auto& t : msg.tracks)
      if (t.status == TrackStatus::confirmed) tracks.push_back(&t);

    std::vector<FusedObject> predicted;
    predicted.reserve(objects_.size());
    for (const auto& o : objects_) predicted.push_back(combine(o, msg.timestamp));

    Eigen::MatrixXd cost(static_cast<Eigen::Index>(predicted.size()), static_cast<Eigen::Index>(tracks.size()));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      for (std::size_t j = 0; j < tracks.size(); ++j) {
        const auto& t = *tracks[j];
        const Eigen::Vector2d nu = t.x.head<2>() - predicted[i].x.head<2>();
        const Mat2 S = t.P.topLeftCorner<2, 2>() + predicted[i].P.topLeftCorner<2, 2>();
        double c = std::sqrt(nu.dot(S.ldlt().solve(nu)));
        const auto h = history_.find({msg.sensor_id, t.id});
        if (h != history_.end() && h->second.fused_id == predicted[i].id)
          c -= cfg_.history_bonus * std::min(h->second.count, cfg_.history_cap);
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      }
    }
    const auto pairs = gated_assignment(cost, cfg_.gate);
    std::vector<char> used(tracks.size(), 0);
    for (auto [i, j] : pairs) {
      attach(objects_[static_cast<std::size_t>(i)], msg, *tracks[static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = 1;
    }
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      if (used[j]) continue;
      Internal obj;
      obj.id = next_id_++;
      ++stats_.objects_spawned;
      objects_.push_back(std::move(obj));
      attach(objects_.back(), msg, *tracks[j]);
    }
  }

  void attach(Internal& obj, const SensorTrackMessage& msg, const Track& t) {
    // A sensor track feeds at most one fused object.
    for (auto& other : objects_) {
      if (other.id == obj.id) continue;
      const auto it = other.contributions.find(msg.sensor_id);
      if (it != other.contributions.end() && it->second.track_id == t.id) other.contributions.erase(it);
    }
    obj.contributions[msg.sensor_id] = Contribution{t.id, t.x, t.P, msg.timestamp};
    obj.last_update = std::max(obj.last_update, msg.timestamp);
    epoch_contrib_[obj.id][msg.sensor_id] = t.plausibility;

    auto& h = history_[{msg.sensor_id, t.id}];
    h.count = (h.fused_id == obj.id) ? h.count + 1 : 1;
    h.fused_id = obj.id;
  }

  FusionConfig cfg_;
  FusionStats stats_;
  std::vector<SensorTrackMessage> buffer_;
  std::vector<Internal> objects_;
  std::map<std::pair<int, std::uint64_t>, HistoryEntry> history_;
  std::map<std::uint64_t, std::map<int, double>> epoch_contrib_;
  std::uint64_t next_id_ = 1;
  double horizon_ = -std::numeric_limits<double>::infinity();
  double last_epoch_ = -std::numeric_limits<double>::infinity();
};

// Joins front and rear returns of one long vehicle. The front return comes
// from an upstream-facing sensor (ahead of the vehicle), the rear one from a
// downstream-facing sensor.
inline std::vector<FusedObject> merge_long_objects(std::vector<FusedObject> objects, const FusionConfig& cfg) {
  const std::size_t n = objects.size();
  auto seen_by = [&](const FusedObject& o, Facing f) {
    return std::any_of(o.sensors.begin(), o.sensors.end(), [&](int s) {
      const auto it = cfg.sensor_facing.find(s);
      return it != cfg.sensor_facing.end() && it->second == f;
    });
  };
  auto mergeable = [&](const FusedObject& a, const FusedObject& b) {
    if (a.lane_index != b.lane_index) return false;
    const FusedObject& front = a.x(0) >= b.x(0) ? a : b;
    const FusedObject& rear = a.x(0) >= b.x(0) ? b : a;
    return front.x(0) - rear.x(0) <= cfg.merge_gap_max && std::abs(a.x(2) - b.x(2)) <= cfg.merge_dv_max &&
           seen_by(front, Facing::upstream) && seen_by(rear, Facing::downstream);
  };

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (mergeable(objects[i], objects[j])) {
        edges.emplace_back(i, j);
        parent[find(i)] = find(j);
      }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);

  auto span_of = [&](const std::vector<std::size_t>& g) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : g) {
      lo = std::min(lo, objects[i].x(0));
      hi = std::max(hi, objects[i].x(0));
    }
    return hi - lo;
  };

  // Components too long for one vehicle fall back to pairwise merging, closest
  // pairs first, each object used once.
  std::vector<std::vector<std::size_t>> final_groups;
  for (auto& [root, g] : groups) {
    if (g.size() == 1 || span_of(g) + cfg.length_margin <= cfg.max_object_length ||
        span_of(g) <= cfg.merge_gap_max) {
      if (g.size() == 1 || span_of(g) <= cfg.merge_gap_max) {
        final_groups.push_back(g);
        continue;
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> local;
    for (auto [i, j] : edges)
      if (find(i) == root) local.emplace_back(i, j);
    std::sort(local.begin(), local.end(), [&](auto p, auto q) {
      return std::abs(objects[p.first].x(0) - objects[p.second].x(0)) <
             std::abs(objects[q.first].x(0) - objects[q.second].x(0));
    });
    std::set<std::size_t> taken;
    for (auto [i, j] : local) {
      if (taken.count(i) || taken.count(j)) continue;
      taken.insert(i);
      taken.insert(j);
      final_groups.push_back({i, j});
    }
    for (auto i : g)
      if (!taken.count(i)) final_groups.push_back({i});
  }

  std::vector<FusedObject> out;
  for (const auto& g : final_groups) {
    if (g.size() == 1) {
      out.push_back(objects[g.front()]);
      continue;
    }
    FusedObject m = objects[g.front()];
    for (std::size_t k = 1; k < g.size(); ++k) {
      const auto& o = objects[g[k]];
      std::tie(m.x, m.P) = fuse_states<4>(m.x, m.P, o.x, o.P);
      m.id = std::min(m.id, o.id);
      m.plausibility = std::max(m.plausibility, o.plausibility);
      m.sensors.insert(o.sensors.begin(), o.sensors.end());
      m.last_update = std::max(m.last_update, o.last_update);
    }
    m.length_estimate = std::min(cfg.max_object_length, span_of(g) + cfg.length_margin);
    m.lane_index = cfg.road.nearest_lane(m.x(1));
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

}  // namespace kora9
