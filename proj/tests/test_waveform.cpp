#include <gtest/gtest.h>

#include <random>

#include "kora9/waveform.hpp"
#include "oracles.hpp"

using namespace kora9;

TEST(Waveform, DerivedQuantitiesFromTableValues) {
  const auto d = derive_waveform(WaveformConfig{});
  EXPECT_EQ(d.samples_per_chirp, 256u);
  EXPECT_EQ(d.n_range_bins, 128u);
  EXPECT_NEAR(d.range_resolution, kSpeedOfLight / (2.0 * 150e6), 1e-12);
  EXPECT_NEAR(d.unambiguous_range, 127.9114, 1e-3);
  EXPECT_NEAR(d.unambiguous_speed, 66.4213, 1e-3);
  EXPECT_NEAR(d.doppler_resolution, 66.4213 / 32.0, 1e-4);
}

TEST(Waveform, ReportsPublishedFiguresAsDeviations) {
  const auto d = derive_waveform(WaveformConfig{});
  ASSERT_EQ(d.deviations.size(), 2u);
  EXPECT_EQ(d.deviations[0].quantity, "unambiguous_range");
  EXPECT_LT(std::abs(d.deviations[0].relative), 0.01);
  EXPECT_EQ(d.deviations[1].quantity, "unambiguous_speed");
  EXPECT_NEAR(d.deviations[1].relative, (66.4213 - 66.56) / 66.56, 1e-4);
}

TEST(Waveform, RejectsNonIntegerSampleCount) {
  WaveformConfig w;
  w.t_chirp = 20.5e-6;
  EXPECT_THROW(w.validate(), ConfigError);
  w = {};
  w.t_rep = 10e-6;
  EXPECT_THROW(w.validate(), ConfigError);
  w = {};
  w.bw = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Waveform, PeriodicHannIsZeroAtStartAndOneAtCentre) {
  const auto w = make_window(WindowKind::hann, 8);
  EXPECT_DOUBLE_EQ(w[0], 0.0);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
  EXPECT_NEAR(w[1], w[7], 1e-15);
}

TEST(Waveform, FftMatchesDirectDft) {
  WaveformConfig w;
  w.fs = 1.5625e6;  // 32 samples per chirp keeps the direct DFT cheap
  w.n_ramps = 8;
  w.configured_unambiguous_range.reset();
  w.configured_unambiguous_speed.reset();
  const std::vector<PointEcho> echoes{{4.3, 3.0, 1.0, 0.2}, {9.7, -5.0, 0.5, 1.0}};
  const auto frame = synthesize_beat_frames(w, echoes, 0.1, 9);
  for (auto kind : {WindowKind::rectangular, WindowKind::hann}) {
    const auto fast = range_doppler_spectrum(frame, kind);
    const auto slow = oracle::dft_range_doppler(frame.data, frame.n_ramps, frame.n_samples,
                                                make_window(kind, frame.n_samples), make_window(kind, frame.n_ramps));
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(std::abs(fast[i] - slow[i]), 0.0, 1e-9);
  }
}

TEST(Waveform, OnGridEchoLandsOnItsBin) {
  WaveformConfig w;
  const auto d = derive_waveform(w);
  const PointEcho e{40.0 * d.range_resolution, 5.0 * d.doppler_resolution, 1.0, 0.0};
  const auto map = range_doppler_map(synthesize_beat_frames(w, std::vector{e}, 0.0, 0));
  const auto peaks = extract_peaks(map, 20.0);
  ASSERT_FALSE(peaks.peaks.empty());
  EXPECT_EQ(peaks.peaks[0].range_bin, 40u);
  EXPECT_EQ(peaks.peaks[0].doppler_bin, 16u + 5u);
  EXPECT_NEAR(peaks.peaks[0].velocity, e.radial_velocity, 1e-9);
}

TEST(Waveform, NoiseIsSeededAndCircular) {
  WaveformConfig w;
  const auto a = synthesize_beat_frames(w, {}, 1.0, 5);
  const auto b = synthesize_beat_frames(w, {}, 1.0, 5);
  EXPECT_EQ(a, b);
  double pr = 0.0, pi = 0.0;
  for (auto x : a.data) {
    pr += x.real() * x.real();
    pi += x.imag() * x.imag();
  }
  const double n = static_cast<double>(a.data.size());
  EXPECT_NEAR((pr + pi) / n, 1.0, 0.03);
  EXPECT_NEAR(pr / n, 0.5, 0.02);
}

TEST(Waveform, RandomEchoesRecoveredWithinOneBin) {
  WaveformConfig w;
  const auto d = derive_waveform(w);
  auto rng = make_stream(17, StreamTag::test);
  std::uniform_real_distribution<double> ur(3.0 * d.range_resolution, d.unambiguous_range - 3.0 * d.range_resolution);
  std::uniform_real_distribution<double> uv(-d.max_abs_velocity + 2.0 * d.doppler_resolution,
                                            d.max_abs_velocity - 2.0 * d.doppler_resolution);
  for (int i = 0; i < 40; ++i) {
    const PointEcho e{ur(rng), uv(rng), 1.0, 0.0};
    const auto map = range_doppler_map(synthesize_beat_frames(w, std::vector{e}, 0.01, 100 + i));
    const auto p = extract_peaks(map, 10.0).peaks.at(0);
    EXPECT_LE(std::abs(static_cast<double>(p.range_bin) - e.range / d.range_resolution), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(p.doppler_bin) - 16.0 - e.radial_velocity / d.doppler_resolution), 1.0);
  }
}

TEST(Waveform, PeakThresholdMustBePositive) {
  const auto map = range_doppler_map(synthesize_beat_frames(WaveformConfig{}, {}, 0.1, 1));
  EXPECT_THROW(extract_peaks(map, 0.0), ContractError);
}

TEST(Waveform, PlateauYieldsOnePeak) {
  RangeDopplerMap m;
  m.n_range_bins = 6;
  m.n_doppler_bins = 4;
  m.range_bin_m = 1.0;
  m.velocity_bin_mps = 1.0;
  m.db.assign(24, 0.0);
  m.at(2, 1) = m.at(3, 1) = 30.0;
  const auto p = extract_peaks(m, 10.0);
  ASSERT_EQ(p.peaks.size(), 1u);
  EXPECT_EQ(p.peaks[0].range_bin, 2u);
}

TEST(Waveform, FrameShapeMismatchIsAContractError) {
  auto f = make_empty_frame(WaveformConfig{});
  f.data.pop_back();
  EXPECT_THROW(range_doppler_spectrum(f, WindowKind::hann), ContractError);
}
