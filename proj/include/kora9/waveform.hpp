#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "kora9/core.hpp"

namespace kora9 {

enum class WindowKind { rectangular, hann, hamming };

inline std::string_view to_string(WindowKind w) {
  switch (w) {
    case WindowKind::rectangular: return "rectangular";
    case WindowKind::hann: return "hann";
    case WindowKind::hamming: return "hamming";
  }
  return "rectangular";
}

inline std::optional<WindowKind> window_from_string(std::string_view s) {
  if (s == "rectangular") return WindowKind::rectangular;
  if (s == "hann") return WindowKind::hann;
  if (s == "hamming") return WindowKind::hamming;
  return std::nullopt;
}

// Chirp-sequence FMCW parameters. Defaults are the deployed sensor's
// configuration; t_rep and n_ramps are not published and are chosen here.
struct WaveformConfig {
  double f0 = 76.5e9;
  double bw = 150e6;
  double fs = 12.5e6;
  double t_chirp = 20.48e-6;
  double t_rep = 29.5e-6;
  int n_ramps = 32;
  double cycle_rate = 20.0;
  WindowKind window = WindowKind::hann;

  // Published figures that are checked against, not substituted for, the
  // derived values.
  std::optional<double> configured_unambiguous_range = 127.2;
  std::optional<double> configured_unambiguous_speed = 66.56;

  void validate() const {
    for (auto [name, v] : {std::pair{"f0", f0}, {"bw", bw}, {"fs", fs}, {"t_chirp", t_chirp},
                           {"t_rep", t_rep}, {"cycle_rate", cycle_rate}}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("waveform.") + name + " must be > 0");
    }
    if (n_ramps < 1) throw ConfigError("waveform.n_ramps must be >= 1");
    if (t_rep < t_chirp) throw ConfigError("waveform.t_rep must be >= t_chirp");
    const double n = fs * t_chirp;
    if (std::abs(n - std::round(n)) > 1e-6 || std::round(n) < 2.0)
      throw ConfigError("waveform.fs * waveform.t_chirp must be an integer sample count");
  }

  std::size_t samples_per_chirp() const { return static_cast<std::size_t>(std::llround(fs * t_chirp)); }
  double chirp_slope() const { return bw / t_chirp; }
  double wavelength() const { return kSpeedOfLight / f0; }
  double beat_frequency(double range) const { return 2.0 * range * bw / (kSpeedOfLight * t_chirp); }
  double doppler_frequency(double radial_velocity) const { return 2.0 * radial_velocity * f0 / kSpeedOfLight; }
};

struct WaveformDeviation {
  std::string quantity;
  double derived = 0.0;
  double configured = 0.0;
  double relative = 0.0;  // (derived - configured) / configured
};

struct DerivedWaveform {
  std::size_t samples_per_chirp = 0;
  std::size_t n_range_bins = 0;
  std::size_t n_doppler_bins = 0;
  double range_resolution = 0.0;
  double doppler_resolution = 0.0;
  double unambiguous_range = 0.0;
  double unambiguous_speed = 0.0;  // full span lambda / (2 t_rep)
  double max_abs_velocity = 0.0;   // half the span
  double chirp_slope = 0.0;
  double wavelength = 0.0;
  std::vector<WaveformDeviation> deviations;
};

inline DerivedWaveform derive_waveform(const WaveformConfig& cfg) {
  cfg.validate();
  DerivedWaveform d;
  d.samples_per_chirp = cfg.samples_per_chirp();
  d.n_range_bins = d.samples_per_chirp / 2;
  d.n_doppler_bins = static_cast<std::size_t>(cfg.n_ramps);
  d.chirp_slope = cfg.chirp_slope();
  d.wavelength = cfg.wavelength();
  d.range_resolution = kSpeedOfLight / (2.0 * cfg.bw);
  // Largest range whose beat frequency stays at or below fs/2.
  d.unambiguous_range = 0.5 * cfg.fs * kSpeedOfLight * cfg.t_chirp / (2.0 * cfg.bw);
  d.unambiguous_speed = d.wavelength / (2.0 * cfg.t_rep);
  d.max_abs_velocity = 0.5 * d.unambiguous_speed;
  d.doppler_resolution = d.unambiguous_speed / static_cast<double>(cfg.n_ramps);
  if (cfg.configured_unambiguous_range) {
    const double c = *cfg.configured_unambiguous_range;
    d.deviations.push_back({"unambiguous_range", d.unambiguous_range, c, (d.unambiguous_range - c) / c});
  }
  if (cfg.configured_unambiguous_speed) {
    const double c = *cfg.configured_unambiguous_speed;
    d.deviations.push_back({"unambiguous_speed", d.unambiguous_speed, c, (d.unambiguous_speed - c) / c});
  }
  return d;
}

// Point-target echo. Positive radial velocity means receding.
struct PointEcho {
  double range = 0.0;
  double radial_velocity = 0.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

// One frame of complex IF samples, ramp-major.
struct BeatFrame {
  WaveformConfig cfg;
  std::size_t n_ramps = 0;
  std::size_t n_samples = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(std::size_t ramp, std::size_t sample) { return data[ramp * n_samples + sample]; }
  const std::complex<double>& at(std::size_t ramp, std::size_t sample) const { return data[ramp * n_samples + sample]; }
  bool operator==(const BeatFrame& o) const {
    return n_ramps == o.n_ramps && n_samples == o.n_samples && data == o.data;
  }
};

inline BeatFrame make_empty_frame(const WaveformConfig& cfg) {
  cfg.validate();
  BeatFrame f;
  f.cfg = cfg;
  f.n_ramps = static_cast<std::size_t>(cfg.n_ramps);
  f.n_samples = cfg.samples_per_chirp();
  f.data.assign(f.n_ramps * f.n_samples, {0.0, 0.0});
  return f;
}

inline void add_echoes(BeatFrame& frame, std::span<const PointEcho> echoes) {
  const auto& cfg = frame.cfg;
  for (const auto& e : echoes) {
    const double fb = cfg.beat_frequency(e.range);
    const double fd = cfg.doppler_frequency(e.radial_velocity);
    for (std::size_t m = 0; m < frame.n_ramps; ++m) {
      const double slow = fd * static_cast<double>(m) * cfg.t_rep;
      for (std::size_t n = 0; n < frame.n_samples; ++n) {
        const double cycles = fb * static_cast<double>(n) / cfg.fs + slow;
        frame.at(m, n) += std::polar(e.amplitude, 2.0 * std::numbers::pi * cycles + e.phase);
      }
    }
  }
}

// Circular complex white noise with E|n|^2 = sigma^2.
inline void add_noise(BeatFrame& frame, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  auto rng = make_stream(seed, StreamTag::waveform_noise);
  std::normal_distribution<double> n(0.0, sigma / std::numbers::sqrt2);
  for (auto& x : frame.data) {
    const double re = n(rng);
    const double im = n(rng);
    x += std::complex<double>(re, im);
  }
}

inline BeatFrame synthesize_beat_frames(const WaveformConfig& cfg, std::span<const PointEcho> echoes,
                                        double noise_sigma, std::uint64_t seed) {
  BeatFrame f = make_empty_frame(cfg);
  add_echoes(f, echoes);
  add_noise(f, noise_sigma, seed);
  return f;
}

inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  const double two_pi_over_n = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(two_pi_over_n * static_cast<double>(i));
    if (kind == WindowKind::hann) w[i] = 0.5 - 0.5 * c;
    else if (kind == WindowKind::hamming) w[i] = 0.54 - 0.46 * c;
  }
  return w;
}

inline constexpr double kDbEpsilon = 1e-12;

// Magnitudes in dB, Doppler-major storage: db[doppler * n_range_bins + range].
// Doppler bin n_doppler_bins / 2 is zero velocity.
struct RangeDopplerMap {
  std::size_t n_range_bins = 0;
  std::size_t n_doppler_bins = 0;
  double range_bin_m = 0.0;
  double velocity_bin_mps = 0.0;
  std::vector<double> db;

  double& at(std::size_t range_bin, std::size_t doppler_bin) { return db[doppler_bin * n_range_bins + range_bin]; }
  double at(std::size_t range_bin, std::size_t doppler_bin) const { return db[doppler_bin * n_range_bins + range_bin]; }
  double range_of(double range_bin) const { return range_bin * range_bin_m; }
  double velocity_of(double doppler_bin) const {
    return (doppler_bin - static_cast<double>(n_doppler_bins / 2)) * velocity_bin_mps;
  }
  bool same_shape(const RangeDopplerMap& o) const {
    return n_range_bins == o.n_range_bins && n_doppler_bins == o.n_doppler_bins;
  }
};

// Complex spectrum before the dB conversion, same layout as RangeDopplerMap.
inline std::vector<std::complex<double>> range_doppler_spectrum(const BeatFrame& frame, WindowKind window) {
  if (frame.data.size() != frame.n_ramps * frame.n_samples || frame.n_ramps == 0 || frame.n_samples < 2 ||
      frame.n_samples != frame.cfg.samples_per_chirp() ||
      frame.n_ramps != static_cast<std::size_t>(frame.cfg.n_ramps))
    throw ContractError("beat frame shape does not match its waveform configuration");

  const std::size_t n_ramps = frame.n_ramps;
  const std::size_t n_samples = frame.n_samples;
  const std::size_t n_range = n_samples / 2;
  const auto w_fast = make_window(window, n_samples);
  const auto w_slow = make_window(window, n_ramps);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(n_samples), out;
  // range_spec[m * n_range + r]
  std::vector<std::complex<double>> range_spec(n_ramps * n_range);
  for (std::size_t m = 0; m < n_ramps; ++m) {
    for (std::size_t n = 0; n < n_samples; ++n) in[n] = frame.at(m, n) * w_fast[n];
    fft.fwd(out, in);
    std::copy_n(out.begin(), n_range, range_spec.begin() + static_cast<std::ptrdiff_t>(m * n_range));
  }

  std::vector<std::complex<double>> spectrum(n_ramps * n_range);
  std::vector<std::complex<double>> col(n_ramps);
  for (std::size_t r = 0; r < n_range; ++r) {
    for (std::size_t m = 0; m < n_ramps; ++m) col[m] = range_spec[m * n_range + r] * w_slow[m];
    fft.fwd(out, col);
    for (std::size_t k = 0; k < n_ramps; ++k) {
      const std::size_t shifted = (k + n_ramps / 2) % n_ramps;
      spectrum[shifted * n_range + r] = out[k];
    }
  }
  return spectrum;
}

inline RangeDopplerMap range_doppler_map(const BeatFrame& frame, WindowKind window) {
  const auto spectrum = range_doppler_spectrum(frame, window);
  const auto derived = derive_waveform(frame.cfg);
  RangeDopplerMap map;
  map.n_range_bins = frame.n_samples / 2;
  map.n_doppler_bins = frame.n_ramps;
  map.range_bin_m = derived.range_resolution;
  map.velocity_bin_mps = derived.doppler_resolution;
  map.db.resize(spectrum.size());
  std::transform(spectrum.begin(), spectrum.end(), map.db.begin(),
                 [](std::complex<double> x) { return 20.0 * std::log10(std::abs(x) + kDbEpsilon); });
  return map;
}

inline RangeDopplerMap range_doppler_map(const BeatFrame& frame) { return range_doppler_map(frame, frame.cfg.window); }

inline double median_db(const RangeDopplerMap& map) {
  if (map.db.empty()) return 20.0 * std::log10(kDbEpsilon);
  std::vector<double> v = map.db;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

struct RangeDopplerPeak {
  std::size_t range_bin = 0;
  std::size_t doppler_bin = 0;
  double range = 0.0;
  double velocity = 0.0;
  double magnitude_db = 0.0;
};

struct PeakList {
  double floor_db = 0.0;
  std::vector<RangeDopplerPeak> peaks;  // strongest first
};

// 8-neighbourhood local maxima above median floor + threshold. Plateaus yield
// a single peak at their first cell in scan order.
inline PeakList extract_peaks(const RangeDopplerMap& map, double threshold_db_above_floor) {
  if (!(threshold_db_above_floor > 0.0)) throw ContractError("peak threshold must be > 0 dB");
  PeakList out;
  out.floor_db = median_db(map);
  const double level = out.floor_db + threshold_db_above_floor;
  const auto nr = static_cast<std::ptrdiff_t>(map.n_range_bins);
  const auto nd = static_cast<std::ptrdiff_t>(map.n_doppler_bins);
  for (std::ptrdiff_t k = 0; k < nd; ++k) {
    for (std::ptrdiff_t r = 0; r < nr; ++r) {
      const double v = map.db[static_cast<std::size_t>(k * nr + r)];
      if (v <= level) continue;
      bool is_peak = true;
      for (std::ptrdiff_t dk = -1; dk <= 1 && is_peak; ++dk) {
        for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
          if (dk == 0 && dr == 0) continue;
          const auto kk = k + dk;
          const auto rr = r + dr;
          if (kk < 0 || kk >= nd || rr < 0 || rr >= nr) continue;
          const double n = map.db[static_cast<std::size_t>(kk * nr + rr)];
          const bool earlier = dk < 0 || (dk == 0 && dr < 0);
          if (n > v || (earlier && n == v)) {
            is_peak = false;
            break;
          }
        }
      }
      if (!is_peak) continue;
      RangeDopplerPeak p;
      p.range_bin = static_cast<std::size_t>(r);
      p.doppler_bin = static_cast<std::size_t>(k);
      p.range = map.range_of(static_cast<double>(r));
      p.velocity = map.velocity_of(static_cast<double>(k));
      p.magnitude_db = v;
      out.peaks.push_back(p);
    }
  }
  std::stable_sort(out.peaks.begin(), out.peaks.end(),
                   [](const auto& a, const auto& b) { return a.magnitude_db > b.magnitude_db; });
  return out;
}

}  // namespace kora9
