#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wpmec/experiment.hpp"

namespace fs = std::filesystem;
using namespace wpmec;

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw SolverError(ErrorKind::ConfigError, "cannot write " + path.string());
}

std::vector<Regime> parse_regimes(const std::string& list) {
  std::vector<Regime> out;
  std::stringstream ss(list);
  for (std::string name; std::getline(ss, name, ',');) {
    const Regime r = parse_regime(name);
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run(const std::string& config_path, const fs::path& out_dir, std::optional<std::uint64_t> seed, int parallel,
        const std::string& regimes) {
  Config config;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw SolverError(ErrorKind::ConfigError, "cannot read " + config_path);
    std::stringstream text;
    text << in.rdbuf();
    config = parse_config(text.str(), seed);
    if (!regimes.empty()) config.regimes = parse_regimes(regimes);
    fs::create_directories(out_dir);
    write_file(out_dir / "manifest.json", manifest_json(config));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  bool failed = false;
  for (Framework fw : config.frameworks) {
    if (config.ps.empty()) break;
    std::cerr << "sweeping " << framework_name(fw) << ": " << config.ps.size() << " powers x "
              << config.regimes.size() << " regimes\n";
    const auto rows = sweep_compare(config, fw, parallel);
    const std::string name = framework_name(fw);
    try {
      write_file(out_dir / ("sweep_" + name + ".csv"), sweep_csv(rows));
      write_file(out_dir / ("traces_" + name + ".csv"), trace_csv(rows));
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }
    for (const auto& r : rows)
      if (r.hard_failure) {
        std::cerr << "solver failure at Ps = " << r.Ps << " W, " << regime_name(r.regime) << ": " << r.status << "\n";
        failed = true;
      }
  }
  return failed ? kSolverFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-min computation-efficiency allocation for wireless-powered edge computing"};
  app.require_subcommand(1);

  std::string config_path, regimes;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int parallel = 1;
  CLI::App* run_cmd = app.add_subcommand("run", "Run the sweeps of a config and write CSVs plus a manifest");
  run_cmd->add_option("config", config_path, "JSON config file")->required();
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  run_cmd->add_option("--seed", seed, "Channel seed, overriding the config's");
  run_cmd->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--regimes", regimes, "Comma-separated regimes, e.g. tdma_partial,noma_binary");

  app.add_subcommand("default-config", "Print the reference scenario as a config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (app.got_subcommand("default-config")) {
    std::cout << manifest_json(default_config());
    return 0;
  }
  return run(config_path, out_dir, seed, parallel, regimes);
}
