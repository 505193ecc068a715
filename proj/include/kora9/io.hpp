#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kora9/core.hpp"
#include "kora9/coverage.hpp"
#include "kora9/fusion.hpp"
#include "kora9/scene.hpp"
#include "kora9/sensor.hpp"
#include "kora9/tracker.hpp"
#include "kora9/waveform.hpp"

namespace kora9::io {

// ordered_json keeps keys in insertion order; nlohmann prints doubles as the
// shortest string that round-trips, so encode/decode is lossless.
using Json = nlohmann::ordered_json;

inline std::string dump_line(const Json& j) { return j.dump() + "\n"; }

inline Json encode(const TargetList& l) {
  Json targets = Json::array();
  for (const auto& d : l.detections)
    targets.push_back({{"r", d.range}, {"vr", d.radial_velocity}, {"az", d.azimuth}, {"snr", d.snr}});
  return {{"sensor", l.sensor_id}, {"t", l.timestamp}, {"targets", std::move(targets)}};
}

namespace detail {

inline double number(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(std::string("missing key '") + key + "'");
  if (!it->is_number()) throw std::runtime_error(std::string("key '") + key + "' is not a number");
  return it->get<double>();
}

inline int integer(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(std::string("missing key '") + key + "'");
  if (!it->is_number_integer()) throw std::runtime_error(std::string("key '") + key + "' is not an integer");
  return it->get<int>();
}

inline const Json& array(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) throw std::runtime_error(std::string("key '") + key + "' must be an array");
  return *it;
}

}  // namespace detail

inline TargetList decode_target_list(const Json& j) {
  if (!j.is_object()) throw std::runtime_error("record is not an object");
  TargetList l;
  l.sensor_id = detail::integer(j, "sensor");
  l.timestamp = detail::number(j, "t");
  if (!std::isfinite(l.timestamp)) throw std::runtime_error("timestamp is not finite");
  for (const auto& t : detail::array(j, "targets")) {
    if (!t.is_object()) throw std::runtime_error("target is not an object");
    TargetDetection d;
    d.range = detail::number(t, "r");
    d.radial_velocity = detail::number(t, "vr");
    d.azimuth = detail::number(t, "az");
    d.snr = detail::number(t, "snr");
    d.timestamp = l.timestamp;
    d.sensor_id = l.sensor_id;
    l.detections.push_back(d);
  }
  return l;
}

// Blank lines are skipped; any other malformed line raises ParseError with its
// 1-based line number.
inline std::vector<TargetList> read_target_lists(std::istream& in) {
  std::vector<TargetList> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(decode_target_list(Json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(n, e.what());
    }
  }
  return out;
}

inline std::vector<TargetList> read_target_lists(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  return read_target_lists(in);
}

inline Json encode(const Track& t) {
  Json p = Json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) p.push_back(t.P(r, c));
  return {{"id", t.id}, {"s", t.x(0)},          {"d", t.x(1)},
          {"vs", t.x(2)}, {"vd", t.x(3)},       {"P", std::move(p)},
          {"pl", t.plausibility}, {"status", std::string(to_string(t.status))}};
}

inline Json encode_tracks(int sensor_id, double t, std::span<const Track> tracks) {
  Json arr = Json::array();
  for (const auto& tr : tracks) arr.push_back(encode(tr));
  return {{"sensor", sensor_id}, {"t", t}, {"tracks", std::move(arr)}};
}

inline Json encode(const FusedObject& o) {
  Json sensors = Json::array();
  for (int s : o.sensors) sensors.push_back(s);
  return {{"id", o.id},        {"s", o.x(0)},     {"d", o.x(1)},         {"vs", o.x(2)},
          {"lane", o.lane_index}, {"len", o.length_estimate}, {"pl", o.plausibility}, {"sensors", std::move(sensors)}};
}

inline Json encode_fused(double t, std::span<const FusedObject> objects) {
  Json arr = Json::array();
  for (const auto& o : objects) arr.push_back(encode(o));
  return {{"t", t}, {"objects", std::move(arr)}};
}

inline Json encode(const GroundTruthFrame& f) {
  Json arr = Json::array();
  for (const auto& v : f.vehicles)
    arr.push_back({{"id", v.id},
                   {"class", std::string(to_string(v.cls))},
                   {"lane", v.lane_index},
                   {"s", v.s},
                   {"d", v.d},
                   {"speed", v.speed},
                   {"length", v.length}});
  return {{"t", f.timestamp}, {"vehicles", std::move(arr)}};
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Row-major CSV grid, no header.
inline void write_csv_grid(std::ostream& out, std::size_t rows, std::size_t cols, const std::vector<double>& values) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << format_value(values[r * cols + c]);
    }
    out << '\n';
  }
}

inline Json map_sidecar(const RangeDopplerMap& m) {
  return {{"rows", "doppler_bin"},
          {"cols", "range_bin"},
          {"n_rows", m.n_doppler_bins},
          {"n_cols", m.n_range_bins},
          {"unit", "dB"},
          {"range_bin_m", m.range_bin_m},
          {"velocity_bin_mps", m.velocity_bin_mps},
          {"zero_velocity_row", m.n_doppler_bins / 2}};
}

inline Json grid_sidecar(const CoverageGrid& g, const std::string& quantity) {
  return {{"rows", "d_cell"}, {"cols", "s_cell"}, {"n_rows", g.n_d}, {"n_cols", g.n_s},
          {"cell_m", g.cell}, {"origin", "cell centres at (i + 0.5) * cell_m"}, {"quantity", quantity}};
}

// Writes text with '\n' line endings regardless of platform.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("write failed for " + path.string());
}

inline void write_map(const std::filesystem::path& csv, const RangeDopplerMap& m) {
  std::ostringstream os;
  write_csv_grid(os, m.n_doppler_bins, m.n_range_bins, m.db);
  write_text(csv, os.str());
  auto side = csv;
  side.replace_extension(".json");
  write_text(side, map_sidecar(m).dump(2) + "\n");
}

inline void write_grid(const std::filesystem::path& csv, const CoverageGrid& g, const std::string& quantity) {
  std::ostringstream os;
  write_csv_grid(os, g.n_d, g.n_s, g.values);
  write_text(csv, os.str());
  auto side = csv;
  side.replace_extension(".json");
  write_text(side, grid_sidecar(g, quantity).dump(2) + "\n");
}

inline std::string sweep_csv(std::span<const SweepRow> rows, int lane_count) {
  std::ostringstream os;
  os << "rank,pole_count,pole_spacing,yaw,height,at_least_one,at_least_two";
  for (int l = 1; l <= lane_count; ++l) os << ",lane" << l << "_one,lane" << l << "_two";
  os << ",mean_dwell_s\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i + 1 << ',' << r.layout.pole_count << ',' << format_value(r.layout.pole_spacing) << ','
       << format_value(r.layout.yaw) << ',' << format_value(r.layout.height) << ','
       << format_value(r.report.at_least_one) << ',' << format_value(r.report.at_least_two);
    for (const auto& lc : r.report.lanes) os << ',' << format_value(lc.at_least_one) << ',' << format_value(lc.at_least_two);
    os << ',' << format_value(r.report.mean_dwell) << '\n';
  }
  return os.str();
}

}  // namespace kora9::io
