// Command-line front end: run, validate, compare, snapshot.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dvmoss/harness.hpp"
#include "dvmoss/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const dvmoss::ConfigError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

void apply_overrides(dvmoss::ScenarioConfig& cfg, const std::string& seeds, const std::string& algos,
                     const std::string& slots) {
  try {
    if (!seeds.empty()) {
      cfg.runs.seeds.clear();
      for (const auto& s : split_csv(seeds)) cfg.runs.seeds.push_back(std::stoull(s));
    }
    if (!slots.empty()) {
      cfg.slots_s.clear();
      for (const auto& s : split_csv(slots)) cfg.slots_s.push_back(std::stod(s));
    }
  } catch (const std::logic_error&) {
    throw dvmoss::ConfigError(!seeds.empty() ? "--seeds" : "--slots", "expected a comma-separated number list");
  }
  if (!algos.empty()) cfg.runs.algorithms = split_csv(algos);
  dvmoss::validate_scenario(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEO satellite selection and resource allocation experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", seeds, algos, slots;
  int parallel = 1;
  bool wall_time = false;
  auto* run = app.add_subcommand("run", "Run every (slot, seed, algorithm) cell and write CSVs");
  run->add_option("config", config_path, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seeds", seeds, "Comma-separated seeds (overrides runs.seeds)");
  run->add_option("--algos", algos, "Comma-separated algorithms (overrides runs.algorithms)");
  run->add_option("--slots", slots, "Comma-separated slot times in s (overrides time.slots_s)");
  run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--wall-time", wall_time, "Record wall-clock time per cell in summary.csv");

  auto* validate = app.add_subcommand("validate", "Load and validate a scenario");
  std::string validate_path;
  validate->add_option("config", validate_path, "Scenario JSON")->required();

  auto* compare = app.add_subcommand("compare", "Compare algorithms from a run directory's summary.csv");
  std::string compare_dir;
  compare->add_option("dir", compare_dir, "Run output directory")->required();

  auto* snapshot = app.add_subcommand("snapshot", "Dump the visible satellites of one slot");
  std::string snapshot_path;
  double snapshot_slot = 0.0;
  snapshot->add_option("config", snapshot_path, "Scenario JSON")->required();
  snapshot->add_option("--slot", snapshot_slot, "Slot time in s")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  if (*run) {
    return guarded([&] {
      auto cfg = dvmoss::load_scenario(config_path);
      apply_overrides(cfg, seeds, algos, slots);
      if (wall_time) cfg.runs.record_wall_time = true;
      dvmoss::RunOptions opt;
      opt.parallel = parallel;
      const auto res = dvmoss::run_experiment(cfg, out_dir, opt);
      std::cout << res.records.size() << " records, " << res.errors.size() << " failed cells -> " << out_dir
                << '\n';
      try {
        dvmoss::write_comparison(std::cout, dvmoss::compare_baselines(res.records));
      } catch (const dvmoss::PairingError& e) {
        std::cout << "comparison skipped: " << e.what() << '\n';
      }
      return res.errors.empty() ? kOk : kRuntime;
    });
  }
  if (*validate) {
    return guarded([&] {
      const auto cfg = dvmoss::load_scenario(validate_path);
      std::cout << cfg.name << ": " << cfg.constellation.size() << " satellites, " << cfg.ues.count << " UEs, K="
                << cfg.channel.num_subcarriers << ", Z_th=" << cfg.limits.max_satellites << ", "
                << cfg.slots_s.size() << " slots, " << cfg.runs.seeds.size() << " seeds\n";
      return kOk;
    });
  }
  if (*compare) {
    return guarded([&] {
      std::ifstream in(std::filesystem::path(compare_dir) / "summary.csv");
      if (!in) throw std::runtime_error("cannot open summary.csv in " + compare_dir);
      dvmoss::write_comparison(std::cout, dvmoss::compare_baselines(dvmoss::read_summary_csv(in)));
      return kOk;
    });
  }
  return guarded([&] {
    const auto cfg = dvmoss::load_scenario(snapshot_path);
    dvmoss::write_visibility_snapshot(cfg, snapshot_slot, std::cout);
    return kOk;
  });
}
