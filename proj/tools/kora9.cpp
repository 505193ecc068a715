#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kora9/config.hpp"
#include "kora9/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
  std::string scenario = "all";
  std::string input;
};

kora9::RunConfig resolve(const Options& o) {
  auto cfg = o.config.empty() ? kora9::default_config() : kora9::load_config(o.config);
  if (o.seed) kora9::set_seed(cfg, *o.seed);
  if (o.workers) {
    if (*o.workers < 1) throw kora9::UsageError("--workers must be >= 1");
    cfg.workers = *o.workers;
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  return cfg;
}

int parse_scenario(const std::string& s) {
  if (s == "all") return 0;
  try {
    std::size_t pos = 0;
    const int n = std::stoi(s, &pos);
    if (pos == s.size() && n >= 1 && n <= 6) return n;
  } catch (const std::exception&) {
  }
  throw kora9::UsageError("--scenario must be 1..6 or all, got '" + s + "'");
}

void print_summary(const kora9::RunReport& r, const std::string& out) {
  std::cout << r.command << ": wrote " << r.manifest.size() << " files to " << out << '\n';
  for (const auto& [k, v] : r.counts) std::cout << "  " << k << " = " << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Roadside radar network simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the global seed");
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--workers", o.workers, "worker threads for per-sensor stages");
  };
  auto* sim = app.add_subcommand("simulate", "traffic -> target lists -> tracks -> fused objects");
  auto* intf = app.add_subcommand("interfere", "range-Doppler maps for the coexistence scenarios");
  auto* cov = app.add_subcommand("coverage", "k-coverage grid and completeness of the configured layout");
  auto* sweep = app.add_subcommand("sweep", "grid search over pole spacing, yaw and height");
  auto* heat = app.add_subcommand("heatmap", "log-scaled detection heatmap");
  auto* rep = app.add_subcommand("replay", "perception and fusion from recorded target lists");
  for (auto* s : {sim, intf, cov, sweep, heat, rep}) common(s);
  intf->add_option("--scenario", o.scenario, "1..6 or all");
  intf->add_flag_callback("--all", [&] { o.scenario = "all"; }, "same as --scenario all");
  rep->add_option("--input", o.input, "target_lists.jsonl to replay")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto cfg = resolve(o);
    const std::filesystem::path out = cfg.output_dir;
    kora9::RunReport r;
    if (sim->parsed()) r = kora9::run_simulate(cfg, out);
    else if (intf->parsed()) r = kora9::run_interfere(cfg, parse_scenario(o.scenario), out);
    else if (cov->parsed()) r = kora9::run_coverage(cfg, out);
    else if (sweep->parsed()) r = kora9::run_sweep(cfg, out);
    else if (heat->parsed()) r = kora9::run_heatmap(cfg, out);
    else r = kora9::run_replay(cfg, o.input, out);
    print_summary(r, out.string());
    return 0;
  } catch (const kora9::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const kora9::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const kora9::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const kora9::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
