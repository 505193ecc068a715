#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kora9/core.hpp"
#include "kora9/waveform.hpp"

namespace kora9 {

// Interfering transmitter, described relative to the victim's ramp.
struct InterfererConfig {
  double bw_ratio = 1.0;          // interferer bw / victim bw
  double sweep_time_ratio = 1.0;  // interferer chirp (and repetition) time / victim's
  int overlap_ramps = 32;         // victim ramps 0..overlap_ramps-1 see the interferer
  double amplitude = 1.0;
  double carrier_offset = 0.0;  // Hz, added to the interferer's start frequency
  double start_offset = 0.2e-6; // s, delay of the interferer's first ramp

  void validate(const WaveformConfig& victim) const {
    if (!(bw_ratio > 0.0)) throw ConfigError("interference.bw_ratio must be > 0");
    if (!(sweep_time_ratio > 0.0)) throw ConfigError("interference.sweep_time_ratio must be > 0");
    if (overlap_ramps < 0 || overlap_ramps > victim.n_ramps)
      throw ConfigError("interference.overlap_ramps must be in [0, n_ramps]");
    if (!(amplitude >= 0.0)) throw ConfigError("interference.amplitude must be >= 0");
    if (!std::isfinite(carrier_offset) || !std::isfinite(start_offset))
      throw ConfigError("interference offsets must be finite");
  }
};

// Adds the interferer's IF contribution to an existing victim frame.
//
// IF phase is LO phase minus received phase, the same convention that puts a
// delayed echo at a positive beat frequency. Each chirp's phase runs from its
// own start. Samples where the instantaneous difference frequency leaves
// (-fs/2, fs/2) are dropped, modelling an ideal anti-alias low-pass.
inline void add_interference(BeatFrame& frame, const InterfererConfig& intf) {
  const auto& v = frame.cfg;
  intf.validate(v);
  if (intf.amplitude == 0.0 || intf.overlap_ramps == 0) return;

  const double f_start = v.f0 - 0.5 * v.bw;
  const double slope_v = v.chirp_slope();
  const double t_chirp_i = v.t_chirp * intf.sweep_time_ratio;
  const double t_rep_i = v.t_rep * intf.sweep_time_ratio;
  const double slope_i = v.bw * intf.bw_ratio / t_chirp_i;
  const double half_band = 0.5 * v.fs;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t m = 0; m < static_cast<std::size_t>(intf.overlap_ramps); ++m) {
    const double t_m = static_cast<double>(m) * v.t_rep;
    for (std::size_t n = 0; n < frame.n_samples; ++n) {
      const double u_v = static_cast<double>(n) / v.fs;
      const double t = t_m + u_v;
      const double rel = t - intf.start_offset;
      if (rel < 0.0) continue;
      const double k = std::floor(rel / t_rep_i);
      const double t_k = intf.start_offset + k * t_rep_i;
      const double u_i = t - t_k;
      if (u_i > t_chirp_i) continue;  // interferer between chirps

      const double df = (slope_v * u_v) - (intf.carrier_offset + slope_i * u_i);
      if (std::abs(df) >= half_band) continue;

      // Carrier term reduced modulo one cycle before scaling to radians.
      const double carrier_cycles = std::fmod(f_start * (t_k - t_m), 1.0);
      const double cycles = carrier_cycles - intf.carrier_offset * u_i + 0.5 * slope_v * u_v * u_v -
                            0.5 * slope_i * u_i * u_i;
      frame.at(m, n) += std::polar(intf.amplitude, two_pi * std::fmod(cycles, 1.0));
    }
  }
}

inline BeatFrame synthesize_interference(const WaveformConfig& victim, const InterfererConfig& intf,
                                         std::span<const PointEcho> victim_echoes, double noise_sigma,
                                         std::uint64_t seed) {
  intf.validate(victim);
  BeatFrame f = synthesize_beat_frames(victim, victim_echoes, noise_sigma, seed);
  add_interference(f, intf);
  return f;
}

struct MapCell {
  std::size_t range_bin = 0;
  std::size_t doppler_bin = 0;
  bool operator==(const MapCell&) const = default;
};

struct AnomalyMetrics {
  bool ghost_present = false;
  MapCell ghost_cell{};
  double ghost_peak_db = 0.0;        // map value at the ghost
  double ghost_rise_db = 0.0;        // map minus baseline at the ghost
  double ghost_prominence_db = 0.0;  // ghost above the map's own median
  int ghost_range_smear_bins = 0;
  int ghost_doppler_smear_bins = 0;
  double noise_floor_delta_db = 0.0;
};

struct ExclusionZone {
  MapCell center{};
  std::size_t range_half_width = 3;
  std::size_t doppler_half_width = 2;

  bool contains(std::size_t r, std::size_t k) const {
    const auto dr = r > center.range_bin ? r - center.range_bin : center.range_bin - r;
    const auto dk = k > center.doppler_bin ? k - center.doppler_bin : center.doppler_bin - k;
    return dr <= range_half_width && dk <= doppler_half_width;
  }
};

inline constexpr double kSmearWidthDb = 10.0;
inline constexpr double kAffectedRiseDb = 6.0;

// Cells that rise at least 6 dB over the interference-free baseline are
// interference-affected; the ghost is the strongest affected cell outside the
// zone around the victim's own target. Smear counts the cells on the ghost's
// row (range) and column (Doppler) within 10 dB of the ghost.
inline AnomalyMetrics measure_anomalies(const RangeDopplerMap& map, const RangeDopplerMap& baseline,
                                        const ExclusionZone& victim_zone) {
  if (!map.same_shape(baseline) || map.db.size() != baseline.db.size())
    throw ContractError("anomaly measurement needs maps of identical shape");
  AnomalyMetrics m;
  const double map_median = median_db(map);
  m.noise_floor_delta_db = map_median - median_db(baseline);

  const std::size_t nr = map.n_range_bins;
  const std::size_t nd = map.n_doppler_bins;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nd; ++k)
    for (std::size_t r = 0; r < nr; ++r) {
      if (victim_zone.contains(r, k)) continue;
      if (map.at(r, k) - baseline.at(r, k) < kAffectedRiseDb) continue;
      if (map.at(r, k) > best) {
        best = map.at(r, k);
        m.ghost_cell = {r, k};
      }
    }
  if (!std::isfinite(best)) return m;

  m.ghost_present = true;
  m.ghost_peak_db = best;
  m.ghost_rise_db = best - baseline.at(m.ghost_cell.range_bin, m.ghost_cell.doppler_bin);
  m.ghost_prominence_db = best - map_median;
  const double level = best - kSmearWidthDb;
  for (std::size_t r = 0; r < nr; ++r)
    if (!victim_zone.contains(r, m.ghost_cell.doppler_bin) && map.at(r, m.ghost_cell.doppler_bin) >= level)
      ++m.ghost_range_smear_bins;
  for (std::size_t k = 0; k < nd; ++k)
    if (!victim_zone.contains(m.ghost_cell.range_bin, k) && map.at(m.ghost_cell.range_bin, k) >= level)
      ++m.ghost_doppler_smear_bins;
  return m;
}

// Largest Doppler-summed excess power over the baseline among range bins away
// from the victim target, in dB.
inline double doppler_integrated_ghost_energy_db(const RangeDopplerMap& map, const RangeDopplerMap& baseline,
                                                 const ExclusionZone& victim_zone) {
  if (!map.same_shape(baseline)) throw ContractError("maps differ in shape");
  double best = 0.0;
  for (std::size_t r = 0; r < map.n_range_bins; ++r) {
    const auto dr = r > victim_zone.center.range_bin ? r - victim_zone.center.range_bin
                                                     : victim_zone.center.range_bin - r;
    if (dr <= victim_zone.range_half_width) continue;
    double sum = 0.0;
    for (std::size_t k = 0; k < map.n_doppler_bins; ++k)
      sum += db_to_linear_power(map.at(r, k)) - db_to_linear_power(baseline.at(r, k));
    best = std::max(best, sum);
  }
  return 10.0 * std::log10(best + kDbEpsilon);
}

inline double total_energy(const RangeDopplerMap& map) {
  double e = 0.0;
  for (double x : map.db) e += db_to_linear_power(x);
  return e;
}

// One row of the qualitative coexistence table.
struct InterferenceScenario {
  int index = 1;
  double bw_ratio = 1.0;
  double sweep_time_ratio = 1.0;
  int overlap_ramps_of_32 = 32;
};

inline constexpr std::array<InterferenceScenario, 6> kInterferenceScenarios{{
    {1, 1.0, 1.0, 32},
    {2, 1.01, 1.0, 32},
    {3, 1.2, 1.0, 32},
    {4, 1.01, 1.0, 10},
    {5, 1.0, 1.1, 32},
    {6, 1.0, 1.01, 3},
}};

// Shared settings for the scenario runs.
struct InterferenceSetup {
  WaveformConfig victim = [] {
    WaveformConfig w;
    w.window = WindowKind::rectangular;
    return w;
  }();
  double noise_sigma = 0.05;
  double amplitude = 1.0;
  double carrier_offset = 0.0;
  double start_offset = 0.2e-6;
  // Victim target in bins: long range, approaching (lower right of the map).
  std::size_t target_range_bin = 90;
  int target_doppler_offset_bins = -7;
  std::uint64_t seed = 0;

  void validate() const {
    victim.validate();
    if (!(noise_sigma >= 0.0)) throw ConfigError("interference.noise_sigma must be >= 0");
    if (!(amplitude >= 0.0)) throw ConfigError("interference.amplitude must be >= 0");
    const auto d = derive_waveform(victim);
    if (target_range_bin >= d.n_range_bins) throw ConfigError("interference.target_range_bin out of range");
    if (std::abs(target_doppler_offset_bins) >= victim.n_ramps / 2 && victim.n_ramps > 1)
      throw ConfigError("interference.target_doppler_offset_bins out of range");
  }

  MapCell target_cell() const {
    return {target_range_bin,
            static_cast<std::size_t>(static_cast<int>(victim.n_ramps / 2) + target_doppler_offset_bins)};
  }

  std::vector<PointEcho> default_echoes() const {
    const auto d = derive_waveform(victim);
    return {PointEcho{static_cast<double>(target_range_bin) * d.range_resolution,
                      static_cast<double>(target_doppler_offset_bins) * d.doppler_resolution, 1.0, 0.0}};
  }

  InterfererConfig interferer_for(const InterferenceScenario& s) const {
    InterfererConfig c;
    c.bw_ratio = s.bw_ratio;
    c.sweep_time_ratio = s.sweep_time_ratio;
    c.overlap_ramps = static_cast<int>(std::lround(s.overlap_ramps_of_32 / 32.0 * victim.n_ramps));
    c.amplitude = amplitude;
    c.carrier_offset = carrier_offset;
    c.start_offset = start_offset;
    return c;
  }
};

struct ScenarioResult {
  int index = 0;
  InterfererConfig interferer;
  RangeDopplerMap map;
  RangeDopplerMap baseline;
  AnomalyMetrics metrics;
  double doppler_integrated_energy_db = 0.0;
};

inline RangeDopplerMap interference_baseline(const InterferenceSetup& setup, std::span<const PointEcho> echoes) {
  return range_doppler_map(synthesize_beat_frames(setup.victim, echoes, setup.noise_sigma, setup.seed));
}

inline ScenarioResult run_scenario(int index, const InterferenceSetup& setup, std::span<const PointEcho> echoes) {
  if (index < 1 || index > static_cast<int>(kInterferenceScenarios.size()))
    throw UsageError("interference scenario index must be in 1..6");
  setup.validate();
  ScenarioResult res;
  res.index = index;
  res.interferer = setup.interferer_for(kInterferenceScenarios[static_cast<std::size_t>(index - 1)]);
  res.baseline = interference_baseline(setup, echoes);
  res.map = range_doppler_map(synthesize_interference(setup.victim, res.interferer, echoes, setup.noise_sigma, setup.seed));
  const ExclusionZone zone{setup.target_cell()};
  res.metrics = measure_anomalies(res.map, res.baseline, zone);
  res.doppler_integrated_energy_db = doppler_integrated_ghost_energy_db(res.map, res.baseline, zone);
  return res;
}

inline ScenarioResult run_scenario(int index, const InterferenceSetup& setup = {}) {
  const auto echoes = setup.default_echoes();
  return run_scenario(index, setup, echoes);
}

}  // namespace kora9
