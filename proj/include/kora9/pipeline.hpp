#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kora9/config.hpp"
#include "kora9/coverage.hpp"
#include "kora9/dbscan.hpp"
#include "kora9/fusion.hpp"
#include "kora9/interference.hpp"
#include "kora9/io.hpp"
#include "kora9/scene.hpp"
#include "kora9/sensor.hpp"
#include "kora9/tracker.hpp"

namespace kora9 {

struct ManifestEntry {
  std::string path;
  std::string sidecar;  // empty when none
};

struct RunReport {
  std::string command;
  std::map<std::string, double> counts;
  std::map<std::string, double> stage_seconds;
  std::vector<ManifestEntry> manifest;
};

inline io::Json to_json(const RunReport& r) {
  io::Json files = io::Json::array();
  for (const auto& m : r.manifest) {
    io::Json e = {{"path", m.path}};
    if (!m.sidecar.empty()) e["sidecar"] = m.sidecar;
    files.push_back(std::move(e));
  }
  io::Json counts = io::Json::object();
  for (const auto& [k, v] : r.counts) {
    if (v == std::floor(v) && std::abs(v) < 9e15) counts[k] = static_cast<std::int64_t>(v);
    else counts[k] = v;
  }
  io::Json timing = io::Json::object();
  for (const auto& [k, v] : r.stage_seconds) timing[k] = v;
  return {{"command", r.command}, {"counts", counts}, {"wall_clock_s", timing}, {"manifest", files}};
}

namespace detail {

class StageTimer {
 public:
  StageTimer(RunReport& r, std::string name) : r_(r), name_(std::move(name)), t0_(Clock::now()) {}
  ~StageTimer() { r_.stage_seconds[name_] += std::chrono::duration<double>(Clock::now() - t0_).count(); }

 private:
  using Clock = std::chrono::steady_clock;
  RunReport& r_;
  std::string name_;
  Clock::time_point t0_;
};

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  const unsigned nw = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (nw == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < nw; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += nw) fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::size_t sensor_stride(const RunConfig& c) {
  const double ratio = c.scenario.cycle_rate / c.sensor.cycle_rate;
  const auto k = static_cast<std::size_t>(std::llround(ratio));
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9)
    throw ConfigError("scenario.cycle_rate must be an integer multiple of sensor.cycle_rate");
  return k;
}

inline std::uint64_t cycle_of(double t, double rate) { return static_cast<std::uint64_t>(std::llround(t * rate)); }

}  // namespace detail

// Per-sensor output of the perception chain for one cycle.
struct TrackSnapshot {
  int sensor_id = 0;
  double timestamp = 0.0;
  std::vector<Track> tracks;
};

struct PerceptionStats {
  std::size_t detections = 0;
  std::size_t clusters = 0;
  std::size_t tracks_spawned = 0;
  std::size_t tracks_deleted = 0;
};

// Cluster -> measurement -> track for one sensor's time-ordered target lists.
inline std::vector<TrackSnapshot> perceive(const std::vector<TargetList>& lists, const SensorPose& pose,
                                           const RunConfig& cfg, PerceptionStats& stats) {
  std::vector<TrackSnapshot> out;
  if (lists.empty()) return out;
  Tracker tracker(cfg.tracker, lists.front().sensor_id);
  std::uint64_t max_id = 0;
  for (const auto& l : lists) {
    stats.detections += l.detections.size();
    const auto cl = dbscan_range_doppler(l.detections, cfg.cluster);
    stats.clusters += cl.clusters.size();
    std::vector<Measurement> meas;
    meas.reserve(cl.clusters.size());
    for (auto c : cl.clusters) {
      c.timestamp = l.timestamp;
      c.sensor_id = l.sensor_id;
      meas.push_back(cluster_to_measurement(c, pose, cfg.sensor));
    }
    auto snap = tracker.step(meas, l.timestamp);
    for (const auto& t : snap) {
      max_id = std::max(max_id, t.id);
      if (t.status == TrackStatus::deleted) ++stats.tracks_deleted;
    }
    out.push_back({l.sensor_id, l.timestamp, std::move(snap)});
  }
  stats.tracks_spawned = max_id;
  return out;
}

struct FusionRun {
  std::vector<std::pair<double, std::vector<FusedObject>>> epochs;
  FusionStats stats;
};

// Delivers track messages to the fusion node with a seeded per-message
// latency and runs fusion epochs until every message has been processed.
inline FusionRun run_fusion(const std::vector<TrackSnapshot>& snapshots, const RunConfig& cfg,
                            const std::map<int, Facing>& facing) {
  struct Delivery {
    double arrival;
    const TrackSnapshot* snap;
  };
  std::vector<Delivery> deliveries;
  double last_ts = -std::numeric_limits<double>::infinity();
  for (const auto& s : snapshots) {
    auto rng = make_stream(cfg.seed, StreamTag::transport,
                           (static_cast<std::uint64_t>(s.sensor_id) << 32) | detail::cycle_of(s.timestamp, cfg.sensor.cycle_rate));
    std::uniform_real_distribution<double> lat(cfg.transport.min_latency, cfg.transport.max_latency);
    deliveries.push_back({s.timestamp + lat(rng), &s});
    last_ts = std::max(last_ts, s.timestamp);
  }
  std::sort(deliveries.begin(), deliveries.end(), [](const Delivery& a, const Delivery& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    if (a.snap->sensor_id != b.snap->sensor_id) return a.snap->sensor_id < b.snap->sensor_id;
    return a.snap->timestamp < b.snap->timestamp;
  });

  FusionConfig fc = cfg.fusion;
  fc.sensor_facing = facing;
  FusionEngine engine(fc);
  FusionRun run;
  if (deliveries.empty()) return run;

  const double end = last_ts + fc.reorder_window + cfg.transport.max_latency;
  std::size_t next = 0;
  for (std::uint64_t k = 0;; ++k) {
    const double epoch = static_cast<double>(k) / fc.epoch_rate;
    if (epoch > end + 1e-9) break;
    for (; next < deliveries.size() && deliveries[next].arrival <= epoch; ++next) {
      const auto* s = deliveries[next].snap;
      SensorTrackMessage msg{s->sensor_id, s->timestamp, {}};
      for (const auto& t : s->tracks)
        if (t.status != TrackStatus::deleted) msg.tracks.push_back(t);
      engine.submit(std::move(msg));
    }
    run.epochs.emplace_back(epoch, merge_long_objects(engine.epoch(epoch), fc));
  }
  run.stats = engine.stats();
  return run;
}

struct SensorSetup {
  std::vector<PlacedSensor> sensors;
  std::map<int, SensorPose> poses;
  std::map<int, Facing> facing;
};

inline SensorSetup make_sensor_setup(const RunConfig& cfg) {
  SensorSetup s;
  s.sensors = place_sensors(cfg.layout, cfg.road);
  for (const auto& p : s.sensors) {
    s.poses[p.id] = p.pose;
    s.facing[p.id] = p.pose.facing;
  }
  return s;
}

// Target lists of all sensors, ordered by (timestamp, sensor id).
inline std::vector<TargetList> sense(const GroundTruth& gt, const SensorSetup& setup, const RunConfig& cfg) {
  const std::size_t stride = detail::sensor_stride(cfg);
  std::vector<std::vector<TargetList>> per_sensor(setup.sensors.size());
  detail::parallel_for(setup.sensors.size(), cfg.workers, [&](std::size_t i) {
    const auto& ps = setup.sensors[i];
    for (std::size_t k = 0; k < gt.frames.size(); k += stride)
      per_sensor[i].push_back(generate_target_list(ps.pose, cfg.sensor, gt.frames[k], cfg.seed, ps.id));
  });
  std::vector<TargetList> all;
  for (auto& v : per_sensor) all.insert(all.end(), v.begin(), v.end());
  std::stable_sort(all.begin(), all.end(), [](const TargetList& a, const TargetList& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.sensor_id < b.sensor_id;
  });
  return all;
}

struct PerceptionRun {
  std::vector<TrackSnapshot> snapshots;  // ordered by (timestamp, sensor id)
  PerceptionStats stats;
};

inline PerceptionRun perceive_all(const std::vector<TargetList>& lists, const SensorSetup& setup,
                                  const RunConfig& cfg) {
  std::map<int, std::vector<TargetList>> by_sensor;
  for (const auto& l : lists) {
    if (!setup.poses.count(l.sensor_id))
      throw ConfigError("target list for sensor " + std::to_string(l.sensor_id) + " has no pose in the layout");
    by_sensor[l.sensor_id].push_back(l);
  }
  std::vector<int> ids;
  for (auto& [id, v] : by_sensor) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    ids.push_back(id);
  }
  std::vector<std::vector<TrackSnapshot>> results(ids.size());
  std::vector<PerceptionStats> stats(ids.size());
  detail::parallel_for(ids.size(), cfg.workers, [&](std::size_t i) {
    results[i] = perceive(by_sensor.at(ids[i]), setup.poses.at(ids[i]), cfg, stats[i]);
  });
  PerceptionRun run;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    run.snapshots.insert(run.snapshots.end(), results[i].begin(), results[i].end());
    run.stats.detections += stats[i].detections;
    run.stats.clusters += stats[i].clusters;
    run.stats.tracks_spawned += stats[i].tracks_spawned;
    run.stats.tracks_deleted += stats[i].tracks_deleted;
  }
  std::stable_sort(run.snapshots.begin(), run.snapshots.end(), [](const auto& a, const auto& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.sensor_id < b.sensor_id;
  });
  return run;
}

// Distance from a point to a vehicle's centreline segment [rear, front].
inline double distance_to_vehicle(const Vehicle& v, Point2 p) {
  const double ds = std::max({v.rear() - p.s, 0.0, p.s - v.front()});
  return std::hypot(ds, p.d - v.d);
}

inline constexpr double kOspaCutoff = 5.0;

// Mean nearest-neighbour distance between truth and fused positions, each
// term clipped at the cutoff, averaged over both sets.
inline double ospa_like(const std::vector<Vehicle>& truth, const std::vector<FusedObject>& objs,
                        double cutoff = kOspaCutoff) {
  if (truth.empty() && objs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : truth) {
    double best = cutoff;
    for (const auto& o : objs) best = std::min(best, distance_to_vehicle(v, {o.x(0), o.x(1)}));
    sum += best;
  }
  for (const auto& o : objs) {
    double best = cutoff;
    for (const auto& v : truth) best = std::min(best, distance_to_vehicle(v, {o.x(0), o.x(1)}));
    sum += best;
  }
  return sum / static_cast<double>(truth.size() + objs.size());
}

struct PlausibilityProfile {
  double central_mean = 0.0;
  double outer_mean = 0.0;
  std::size_t central_count = 0;
  std::size_t outer_count = 0;
};

// Central third versus the two outer sixths of the segment.
inline PlausibilityProfile plausibility_profile(const FusionRun& run, const RoadSpec& road) {
  PlausibilityProfile p;
  const double L = road.segment_length;
  double cs = 0.0, os = 0.0;
  for (const auto& [t, objs] : run.epochs) {
    for (const auto& o : objs) {
      const double s = o.x(0);
      if (s >= L / 3.0 && s <= 2.0 * L / 3.0) {
        cs += o.plausibility;
        ++p.central_count;
      } else if ((s >= 0.0 && s <= L / 6.0) || (s >= 5.0 * L / 6.0 && s <= L)) {
        os += o.plausibility;
        ++p.outer_count;
      }
    }
  }
  if (p.central_count) p.central_mean = cs / static_cast<double>(p.central_count);
  if (p.outer_count) p.outer_mean = os / static_cast<double>(p.outer_count);
  return p;
}

struct SimulationResult {
  GroundTruth truth;
  std::vector<TargetList> target_lists;
  PerceptionRun perception;
  FusionRun fusion;
};

inline SimulationResult simulate(const RunConfig& cfg, RunReport* report = nullptr) {
  RunReport scratch;
  RunReport& rep = report ? *report : scratch;
  SimulationResult res;
  const auto setup = make_sensor_setup(cfg);
  {
    detail::StageTimer t(rep, "traffic");
    res.truth = generate_traffic(cfg.scenario, cfg.road);
  }
  {
    detail::StageTimer t(rep, "sensing");
    res.target_lists = sense(res.truth, setup, cfg);
  }
  {
    detail::StageTimer t(rep, "perception");
    res.perception = perceive_all(res.target_lists, setup, cfg);
  }
  {
    detail::StageTimer t(rep, "fusion");
    res.fusion = run_fusion(res.perception.snapshots, cfg, setup.facing);
  }
  return res;
}

namespace detail {

inline std::string target_lists_text(const std::vector<TargetList>& lists) {
  std::string s;
  for (const auto& l : lists) s += io::dump_line(io::encode(l));
  return s;
}

inline std::string tracks_text(const std::vector<TrackSnapshot>& snaps) {
  std::string s;
  for (const auto& sn : snaps) s += io::dump_line(io::encode_tracks(sn.sensor_id, sn.timestamp, sn.tracks));
  return s;
}

inline std::string fused_text(const FusionRun& run) {
  std::string s;
  for (const auto& [t, objs] : run.epochs) s += io::dump_line(io::encode_fused(t, objs));
  return s;
}

inline void add_counts(RunReport& rep, const PerceptionRun& p, const FusionRun& f) {
  rep.counts["detections"] = static_cast<double>(p.stats.detections);
  rep.counts["clusters"] = static_cast<double>(p.stats.clusters);
  rep.counts["tracks_spawned"] = static_cast<double>(p.stats.tracks_spawned);
  rep.counts["tracks_deleted"] = static_cast<double>(p.stats.tracks_deleted);
  rep.counts["fusion_epochs"] = static_cast<double>(f.epochs.size());
  rep.counts["fused_objects_spawned"] = static_cast<double>(f.stats.objects_spawned);
  rep.counts["oosm_discarded"] = static_cast<double>(f.stats.oosm_discarded);
}

inline void finish_report(RunReport& rep, const std::filesystem::path& out) {
  io::write_text(out / "report.json", to_json(rep).dump(2) + "\n");
}

}  // namespace detail

inline RunReport run_simulate(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  RunReport rep;
  rep.command = "simulate";
  const auto res = simulate(cfg, &rep);

  detail::StageTimer t(rep, "output");
  std::string gt;
  for (const auto& f : res.truth.frames) gt += io::dump_line(io::encode(f));
  io::write_text(out / "ground_truth.jsonl", gt);
  io::write_text(out / "target_lists.jsonl", detail::target_lists_text(res.target_lists));
  io::write_text(out / "tracks.jsonl", detail::tracks_text(res.perception.snapshots));
  io::write_text(out / "fused.jsonl", detail::fused_text(res.fusion));

  io::Json per_epoch = io::Json::array();
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [e, objs] : res.fusion.epochs) {
    if (e > res.truth.duration + 1e-9) break;
    const double d = ospa_like(res.truth.at(e).vehicles, objs);
    per_epoch.push_back({{"t", e}, {"ospa", d}});
    sum += d;
    ++n;
  }
  const auto prof = plausibility_profile(res.fusion, cfg.road);
  io::Json metrics = {{"ospa_cutoff_m", kOspaCutoff},
                      {"mean_ospa_m", n ? sum / static_cast<double>(n) : 0.0},
                      {"plausibility_central_third", prof.central_mean},
                      {"plausibility_outer_sixths", prof.outer_mean},
                      {"central_samples", prof.central_count},
                      {"outer_samples", prof.outer_count},
                      {"epochs", std::move(per_epoch)}};
  io::write_text(out / "metrics.json", metrics.dump(2) + "\n");

  rep.counts["frames"] = static_cast<double>(res.truth.frames.size());
  std::set<std::uint64_t> vehicles;
  for (const auto& f : res.truth.frames)
    for (const auto& v : f.vehicles) vehicles.insert(v.id);
  rep.counts["vehicles"] = static_cast<double>(vehicles.size());
  rep.counts["target_lists"] = static_cast<double>(res.target_lists.size());
  detail::add_counts(rep, res.perception, res.fusion);
  for (const char* f : {"ground_truth.jsonl", "target_lists.jsonl", "tracks.jsonl", "fused.jsonl", "metrics.json"})
    rep.manifest.push_back({f, ""});
  detail::finish_report(rep, out);
  return rep;
}

inline RunReport run_replay(const RunConfig& cfg, const std::filesystem::path& lists_path,
                            const std::filesystem::path& out) {
  RunReport rep;
  rep.command = "replay";
  std::vector<TargetList> lists;
  {
    detail::StageTimer t(rep, "parse");
    lists = io::read_target_lists(lists_path);
  }
  std::filesystem::create_directories(out);
  const auto setup = make_sensor_setup(cfg);
  PerceptionRun perc;
  FusionRun fus;
  {
    detail::StageTimer t(rep, "perception");
    perc = perceive_all(lists, setup, cfg);
  }
  {
    detail::StageTimer t(rep, "fusion");
    fus = run_fusion(perc.snapshots, cfg, setup.facing);
  }
  io::write_text(out / "tracks.jsonl", detail::tracks_text(perc.snapshots));
  io::write_text(out / "fused.jsonl", detail::fused_text(fus));
  rep.counts["target_lists"] = static_cast<double>(lists.size());
  detail::add_counts(rep, perc, fus);
  rep.manifest.push_back({"tracks.jsonl", ""});
  rep.manifest.push_back({"fused.jsonl", ""});
  detail::finish_report(rep, out);
  return rep;
}

inline io::Json to_json(const AnomalyMetrics& m) {
  return {{"ghost_present", m.ghost_present},
          {"ghost_range_bin", m.ghost_cell.range_bin},
          {"ghost_doppler_bin", m.ghost_cell.doppler_bin},
          {"ghost_peak_db", m.ghost_peak_db},
          {"ghost_rise_db", m.ghost_rise_db},
          {"ghost_prominence_db", m.ghost_prominence_db},
          {"range_smear_bins", m.ghost_range_smear_bins},
          {"doppler_smear_bins", m.ghost_doppler_smear_bins},
          {"noise_floor_delta_db", m.noise_floor_delta_db}};
}

// `scenario` is 1..6, or 0 for all six.
inline RunReport run_interfere(const RunConfig& cfg, int scenario, const std::filesystem::path& out) {
  if (scenario < 0 || scenario > static_cast<int>(kInterferenceScenarios.size()))
    throw UsageError("--scenario must be 1..6 or all");
  std::filesystem::create_directories(out);
  RunReport rep;
  rep.command = "interfere";
  std::vector<int> which;
  if (scenario == 0)
    for (const auto& s : kInterferenceScenarios) which.push_back(s.index);
  else
    which.push_back(scenario);

  std::vector<ScenarioResult> results(which.size());
  {
    detail::StageTimer t(rep, "scenarios");
    detail::parallel_for(which.size(), cfg.workers,
                         [&](std::size_t i) { results[i] = run_scenario(which[i], cfg.interference); });
  }
  io::write_map(out / "baseline_map.csv", results.front().baseline);
  rep.manifest.push_back({"baseline_map.csv", "baseline_map.json"});
  for (const auto& r : results) {
    const std::string stem = "scenario_" + std::to_string(r.index);
    io::write_map(out / (stem + "_map.csv"), r.map);
    io::Json m = to_json(r.metrics);
    m["scenario"] = r.index;
    m["bw_ratio"] = r.interferer.bw_ratio;
    m["sweep_time_ratio"] = r.interferer.sweep_time_ratio;
    m["overlap_ramps"] = r.interferer.overlap_ramps;
    m["doppler_integrated_energy_db"] = r.doppler_integrated_energy_db;
    io::write_text(out / (stem + "_metrics.json"), m.dump(2) + "\n");
    rep.manifest.push_back({stem + "_map.csv", stem + "_map.json"});
    rep.manifest.push_back({stem + "_metrics.json", ""});
  }
  rep.counts["scenarios"] = static_cast<double>(results.size());
  detail::finish_report(rep, out);
  return rep;
}

inline io::Json to_json(const CompletenessReport& c) {
  io::Json lanes = io::Json::array();
  for (std::size_t l = 0; l < c.lanes.size(); ++l)
    lanes.push_back({{"lane", l + 1},
                     {"vehicle_frames", c.lanes[l].vehicle_frames},
                     {"at_least_one", c.lanes[l].at_least_one},
                     {"at_least_two", c.lanes[l].at_least_two}});
  return {{"vehicle_frames", c.vehicle_frames}, {"at_least_one", c.at_least_one}, {"at_least_two", c.at_least_two},
          {"mean_dwell_s", c.mean_dwell},       {"dwell_runs", c.dwell_runs},     {"lanes", std::move(lanes)}};
}

inline RunReport run_coverage(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  RunReport rep;
  rep.command = "coverage";
  CoverageGrid grid;
  CompletenessReport comp;
  {
    detail::StageTimer t(rep, "coverage");
    grid = k_coverage_grid(cfg.layout, cfg.sensor, cfg.road, cfg.coverage.cell);
    comp = completeness(cfg.layout, cfg.sensor, generate_traffic(cfg.scenario, cfg.road), cfg.road);
  }
  io::write_grid(out / "k_coverage.csv", grid, "k_coverage");
  io::write_text(out / "completeness.json", to_json(comp).dump(2) + "\n");
  rep.manifest.push_back({"k_coverage.csv", "k_coverage.json"});
  rep.manifest.push_back({"completeness.json", ""});
  detail::finish_report(rep, out);
  return rep;
}

inline RunReport run_sweep(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  RunReport rep;
  rep.command = "sweep";
  std::vector<SweepRow> rows;
  {
    detail::StageTimer t(rep, "sweep");
    const auto gt = generate_traffic(cfg.scenario, cfg.road);
    rows = layout_sweep(cfg.coverage.sweep, cfg.layout, cfg.sensor, gt, cfg.road, cfg.workers);
  }
  io::write_text(out / "sweep.csv", io::sweep_csv(rows, cfg.road.lane_count));
  rep.manifest.push_back({"sweep.csv", ""});
  rep.counts["candidates"] = static_cast<double>(rows.size());
  detail::finish_report(rep, out);
  return rep;
}

inline CoverageGrid simulation_heatmap(const RunConfig& cfg, const SimulationResult& sim) {
  std::vector<Point2> pts;
  if (cfg.heatmap.source == "fused") {
    for (const auto& [t, objs] : sim.fusion.epochs)
      for (const auto& o : objs) pts.push_back({o.x(0), o.x(1)});
  } else {
    pts = detections_to_road(sim.target_lists, make_sensor_setup(cfg).poses);
  }
  return detection_heatmap(pts, cfg.road, cfg.heatmap.cell);
}

inline RunReport run_heatmap(const RunConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  RunReport rep;
  rep.command = "heatmap";
  const auto& c = cfg;
  const auto sim = simulate(c, &rep);
  const auto grid = simulation_heatmap(c, sim);
  io::write_grid(out / "heatmap.csv", grid, "log10(1+count)");
  io::Json lanes = io::Json::array();
  for (int l = 1; l <= c.road.lane_count; ++l) lanes.push_back({{"lane", l}, {"mass", lane_mass(grid, c.road, l)}});
  io::write_text(out / "lane_mass.json", io::Json{{"source", c.heatmap.source}, {"lanes", lanes}}.dump(2) + "\n");
  rep.manifest.push_back({"heatmap.csv", "heatmap.json"});
  rep.manifest.push_back({"lane_mass.json", ""});
  detail::finish_report(rep, out);
  return rep;
}

}  // namespace kora9
