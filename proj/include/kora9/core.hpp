#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace kora9 {

inline constexpr double kSpeedOfLight = 299'792'458.0;
inline constexpr double kMaxVehicleSpeed = 160.0 / 3.6;  // 44.44 m/s

// Error taxonomy. The CLI maps ConfigError/UsageError/ParseError to exit 2 and
// NumericError to exit 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Wraps an angle in radians to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

inline double db_to_linear_power(double db) { return std::pow(10.0, db / 10.0); }

// Stream tags keep the random streams of different stages independent even
// when they share the global seed.
enum class StreamTag : std::uint32_t {
  traffic = 1,
  target_list = 2,
  waveform_noise = 3,
  interference = 4,
  transport = 5,
  test = 99,
};

// Deterministic engine for (seed, tag, index). std::seed_seq's mixing is fully
// specified by the standard, so streams are reproducible across platforms.
inline std::mt19937_64 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace kora9
