#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "kora9/core.hpp"
#include "kora9/sensor.hpp"

namespace kora9 {

struct ClusterParams {
  double eps_range = 1.5;
  double eps_velocity = 1.0;
  int min_pts = 1;

  void validate() const {
    if (!(eps_range > 0.0) || !(eps_velocity > 0.0)) throw ConfigError("cluster eps must be > 0 in both axes");
    if (min_pts < 1) throw ConfigError("cluster min_pts must be >= 1");
  }
};

inline constexpr int kNoise = -1;

// Generic DBSCAN over points with a scalar sort key. `key(i)` must be a lower
// bound on the distance structure along one axis: any neighbours of i lie in
// [key(i) - key_radius, key(i) + key_radius]. `neighbors(i, j)` is the full
// predicate. Clusters are numbered in discovery order, scanning seeds by index;
// a border point reachable from several clusters joins the first discovered.
template <class KeyFn, class NeighborFn>
std::vector<int> dbscan_labels(std::size_t n, int min_pts, double key_radius, KeyFn key, NeighborFn neighbors) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = key(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<double> sorted_keys(n);
  for (std::size_t i = 0; i < n; ++i) sorted_keys[i] = keys[order[i]];

  auto region = [&](std::size_t i) {
    std::vector<std::size_t> out;
    auto lo = std::lower_bound(sorted_keys.begin(), sorted_keys.end(), keys[i] - key_radius);
    auto hi = std::upper_bound(sorted_keys.begin(), sorted_keys.end(), keys[i] + key_radius);
    for (auto it = lo; it != hi; ++it) {
      const std::size_t j = order[static_cast<std::size_t>(it - sorted_keys.begin())];
      if (j == i || neighbors(i, j)) out.push_back(j);
    }
    return out;
  };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    auto seeds = region(i);
    if (static_cast<int>(seeds.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    labels[i] = c;
    std::deque<std::size_t> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) labels[j] = c;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = c;
      auto nbrs = region(j);
      if (static_cast<int>(nbrs.size()) >= min_pts) queue.insert(queue.end(), nbrs.begin(), nbrs.end());
    }
  }
  return labels;
}

// Neighbourhood in normalized range-Doppler coordinates (Chebyshev).
inline bool range_doppler_neighbors(const TargetDetection& a, const TargetDetection& b, const ClusterParams& p) {
  return std::max(std::abs(a.range - b.range) / p.eps_range,
                  std::abs(a.radial_velocity - b.radial_velocity) / p.eps_velocity) <= 1.0;
}

struct DetectionCluster {
  std::vector<std::size_t> members;
  // SNR-weighted centroid (linear SNR weights).
  double range = 0.0;
  double radial_velocity = 0.0;
  double azimuth = 0.0;
  double peak_snr = 0.0;
  double timestamp = 0.0;
  int sensor_id = 0;
};

struct Clustering {
  std::vector<int> labels;  // kNoise or cluster index
  std::vector<DetectionCluster> clusters;
  std::vector<std::size_t> noise;
};

inline Clustering dbscan_range_doppler(std::span<const TargetDetection> dets, const ClusterParams& params) {
  params.validate();
  Clustering out;
  out.labels = dbscan_labels(
      dets.size(), params.min_pts, params.eps_range, [&](std::size_t i) { return dets[i].range; },
      [&](std::size_t i, std::size_t j) { return range_doppler_neighbors(dets[i], dets[j], params); });

  int n_clusters = 0;
  for (int l : out.labels) n_clusters = std::max(n_clusters, l + 1);
  out.clusters.resize(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (out.labels[i] == kNoise) out.noise.push_back(i);
    else out.clusters[static_cast<std::size_t>(out.labels[i])].members.push_back(i);
  }
  for (auto& c : out.clusters) {
    double wsum = 0.0;
    c.peak_snr = -std::numeric_limits<double>::infinity();
    for (std::size_t i : c.members) {
      const auto& d = dets[i];
      const double w = db_to_linear_power(d.snr);
      wsum += w;
      c.range += w * d.range;
      c.radial_velocity += w * d.radial_velocity;
      c.azimuth += w * d.azimuth;
      c.peak_snr = std::max(c.peak_snr, d.snr);
    }
    c.range /= wsum;
    c.radial_velocity /= wsum;
    c.azimuth /= wsum;
    c.timestamp = dets[c.members.front()].timestamp;
    c.sensor_id = dets[c.members.front()].sensor_id;
  }
  return out;
}

}  // namespace kora9
