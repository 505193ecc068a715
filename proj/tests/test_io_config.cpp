#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "kora9/config.hpp"
#include "kora9/io.hpp"

using namespace kora9;
namespace fs = std::filesystem;

namespace {

std::vector<TargetList> random_lists(int n) {
  auto rng = make_stream(60, StreamTag::test);
  std::uniform_real_distribution<double> u(-50.0, 120.0);
  std::vector<TargetList> out;
  for (int i = 0; i < n; ++i) {
    TargetList l;
    l.sensor_id = i % 10 + 1;
    l.timestamp = 0.05 * i + 1e-3 * u(rng);
    for (int k = 0; k < i % 4; ++k) {
      TargetDetection d;
      d.range = std::abs(u(rng));
      d.radial_velocity = u(rng) / 3.0;
      d.azimuth = u(rng) / 10.0;
      d.snr = std::abs(u(rng));
      d.timestamp = l.timestamp;
      d.sensor_id = l.sensor_id;
      l.detections.push_back(d);
    }
    out.push_back(l);
  }
  return out;
}

std::string encode_all(const std::vector<TargetList>& lists) {
  std::string s;
  for (const auto& l : lists) s += io::dump_line(io::encode(l));
  return s;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kora9_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(nlohmann::json::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(TargetListIo, RoundTripIsLossless) {
  const auto lists = random_lists(50);
  std::istringstream in(encode_all(lists));
  const auto back = io::read_target_lists(in);
  EXPECT_EQ(back, lists);
  EXPECT_EQ(encode_all(back), encode_all(lists));
}

TEST(TargetListIo, BlankLinesSkipped) {
  const auto lists = random_lists(3);
  std::istringstream in("\n" + encode_all(lists) + "\n  \n");
  EXPECT_EQ(io::read_target_lists(in).size(), 3u);
}

TEST(TargetListIo, CorruptLineReportsItsNumber) {
  std::string text = encode_all(random_lists(20));
  std::size_t pos = 0;
  for (int i = 0; i < 16; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{\"sensor\": 1, \"t\": ");
  std::istringstream in(text);
  try {
    io::read_target_lists(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
    EXPECT_NE(std::string(e.what()).find("line 17"), std::string::npos);
  }
}

TEST(TargetListIo, MissingFieldsAreParseErrors) {
  std::istringstream a(R"({"sensor": 1, "targets": []})");
  EXPECT_THROW(io::read_target_lists(a), ParseError);
  std::istringstream b(R"({"sensor": 1.5, "t": 0, "targets": []})");
  EXPECT_THROW(io::read_target_lists(b), ParseError);
  std::istringstream c(R"({"sensor": 1, "t": 0, "targets": [{"r": 1, "vr": 0, "az": 0}]})");
  EXPECT_THROW(io::read_target_lists(c), ParseError);
}

TEST(CsvGrid, FixedPrecisionRowMajor) {
  std::ostringstream os;
  io::write_csv_grid(os, 2, 3, {1.0, -2.5, 1.0 / 3.0, 0.0, 1e6, 7.0});
  EXPECT_EQ(os.str(), "1.000000,-2.500000,0.333333\n0.000000,1000000.000000,7.000000\n");
}

TEST(Config, DefaultsMatchModuleDefaults) {
  const auto c = default_config();
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.workers, 1u);
  EXPECT_EQ(c.road.lane_count, 3);
  EXPECT_EQ(c.tracker.lane_centers.size(), 3u);
  EXPECT_EQ(c.interference.victim.window, WindowKind::rectangular);
  EXPECT_EQ(c.waveform.window, WindowKind::hann);
}

TEST(Config, SeedPropagates) {
  const auto c = parse_config(nlohmann::json::parse(R"({"seed": 42})"));
  EXPECT_EQ(c.scenario.seed, 42u);
  EXPECT_EQ(c.interference.seed, 42u);
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(config_error(R"({"road": {"lane_cnt": 3}})"), "road.lane_cnt: unknown key");
  EXPECT_EQ(config_error(R"({"bogus": 1})"), "bogus: unknown key");
  EXPECT_EQ(config_error(R"({"scenario": {"lanes": [{"rate": 1}]}})"), "scenario.lanes[0].rate: unknown key");
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_NE(config_error(R"({"tracker": {"gate": -1}})"), "");
  EXPECT_NE(config_error(R"({"road": {"lane_count": 0}})"), "");
  EXPECT_NE(config_error(R"({"waveform": {"window": "kaiser"}})"), "");
  EXPECT_NE(config_error(R"({"road": {"lane_width": "wide"}})"), "");
  EXPECT_NE(config_error(R"({"layout": {"sensors_per_pole": 3}})"), "");
  EXPECT_NE(config_error(R"({"heatmap": {"source": "tracks"}})"), "");
  EXPECT_NE(config_error(R"([1, 2])"), "");
}

TEST(Config, ShippedDemoConfigLoads) {
  const auto c = load_config(fs::path(KORA9_SOURCE_DIR) / "configs" / "demo.json");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.scenario.lanes.size(), 3u);
}

#ifdef KORA9_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + KORA9_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("interfere --scenario 7 --out " + (dir / "a").string()), 2);
  EXPECT_EQ(run_cli("interfere --scenario 2 --out " + (dir / "b").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "b" / "scenario_2_metrics.json"));

  std::ofstream(dir / "bad.json") << R"({"road": {"lane_cnt": 3}})";
  EXPECT_EQ(run_cli("coverage --config " + (dir / "bad.json").string() + " --out " + (dir / "c").string()), 2);
  EXPECT_EQ(run_cli("replay --input " + (dir / "missing.jsonl").string() + " --out " + (dir / "d").string()), 2);

  std::ofstream(dir / "corrupt.jsonl") << "{\"sensor\": 1, \"t\": 0, \"targets\": []}\nnot json\n";
  EXPECT_EQ(run_cli("replay --input " + (dir / "corrupt.jsonl").string() + " --out " + (dir / "e").string()), 2);
  std::ofstream(dir / "empty.jsonl") << "";
  EXPECT_EQ(run_cli("replay --input " + (dir / "empty.jsonl").string() + " --out " + (dir / "f").string()), 0);
  fs::remove_all(dir);
}
#endif
