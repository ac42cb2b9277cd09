// pipetbench command-line front end.
//
// Exit codes:
//   0  success
//   1  runtime error
//   2  usage error
//   3  config error (parse or schema)
//   4  dispense cycle: goal search found no feasible pose
//   5  dispense cycle: motion planning failed after all retries

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pipetbench/pipetbench.hpp"

namespace fs = std::filesystem;
using namespace pipetbench;

namespace {

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kConfig = 3, kGoalSearch = 4, kPlanning = 5 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir;
  bool verbose = false;
};

ScenarioConfig load(const Globals& g) {
  ScenarioConfig c = g.config.empty() ? config_from_scenario(default_scenario()) : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.output_dir = g.out_dir;
  return c;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

int cmd_spiral(double e_mm, double d_mm, const std::string& out) {
  const SpiralLattice lat = build_lattice(e_mm * 1e-3, d_mm * 1e-3);
  std::cout << "rings=" << lat.ring_count() << " nodes=" << lat.size() << '\n';
  if (!out.empty()) {
    std::ostringstream os;
    lat.write_csv(os);
    write_file(out, os.str());
  }
  return kOk;
}

int cmd_patterns(bool list_routine, const std::string& target) {
  if (!target.empty()) {
    const TargetKind kind = target == "corner" ? TargetKind::corner
                            : target == "edge" ? TargetKind::edge
                                               : TargetKind::interior;
    const auto pats = enumerate_patterns(kind);
    std::cout << "target=" << target << " patterns=" << pats.size() << '\n';
    for (const auto& p : pats) std::cout << p << '\n';
    return kOk;
  }
  const PatternCounts c = count_availability_patterns();
  std::cout << "total=" << c.total << " reduced=" << c.symmetry_reduced << " routine=" << c.picking_routine << '\n';
  if (list_routine) {
    for (const auto& m : routine_masks()) std::cout << m.str() << '\n';
  }
  return kOk;
}

int cmd_plan(const Globals& g) {
  const ScenarioConfig cfg = load(g);
  const Scenario s = to_scenario(cfg);
  const SingleCycle cyc = plan_single_cycle(s);
  const fs::path dir = prepare_dir(cfg.output_dir);
  const CycleResult& r = cyc.result;
  for (std::size_t k = 0; k < r.segments.size(); ++k) {
    const auto& seg = r.segments[k];
    std::ostringstream os;
    seg.trajectory.write_csv(os);
    const std::string name = "trajectory_" + std::to_string(k + 1) + "_" + kGoalNames[k] + "_" + kGoalNames[k + 1] + ".csv";
    write_file(dir / name, os.str());
    std::cout << "segment " << segment_name(k) << " duration_s=" << seg.trajectory.duration()
              << " waypoints=" << seg.path.waypoints.size() << " retries=" << seg.retries << '\n';
  }
  if (g.verbose) {
    std::cout << "slot=" << cyc.slot.row << "," << cyc.slot.col << " infeasible=";
    for (std::size_t k = 0; k < r.infeasible.size(); ++k) std::cout << (k ? "," : "") << r.infeasible[k];
    std::cout << '\n';
  }
  std::cout << "total_retries=" << r.total_retries << '\n';
  switch (r.failure) {
    case CycleFailure::none: return kOk;
    case CycleFailure::goal_search:
      std::cerr << "goal search failed at goal " << kGoalNames[std::min<std::size_t>(r.failed_segment + 1, 4)]
                << ": " << r.message << '\n';
      return kGoalSearch;
    case CycleFailure::planning:
      std::cerr << "planning failed on segment " << segment_name(r.failed_segment) << ": " << r.message << '\n';
      return kPlanning;
  }
  return kRuntime;
}

void write_heat(const fs::path& path, const std::array<double, 96>& v) {
  std::ostringstream os;
  write_heat_csv(os, v);
  write_file(path, os.str());
}

int cmd_simulate(const Globals& g, const std::string& mode, int trials) {
  ScenarioConfig cfg = load(g);
  if (!mode.empty()) cfg.mode = mode;
  const Scenario s = to_scenario(cfg);
  const auto runs = run_batch(s, trials);
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_file(dir / "metrics.json", batch_json(runs, cfg.mode.c_str()).dump(2) + "\n");
  const BatchSummary b = summarize(runs);
  write_heat(dir / "heat_success.csv", b.success_rate);
  write_heat(dir / "heat_steps.csv", b.mean_steps);
  write_heat(dir / "heat_infeasible.csv", b.mean_infeasible);
  std::ostringstream tips;
  write_tip_csv(tips, runs.front());
  write_file(dir / "tips.csv", tips.str());
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(4);
  line << "mode=" << cfg.mode << " trials=" << trials << " success_rate=" << b.success_fraction()
       << " average_steps=" << b.average_steps();
  std::cout << line.str() << '\n';
  if (g.verbose) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      std::cout << "trial " << i << " successes=" << runs[i].successes << "/" << runs[i].attempted
                << " steps=" << runs[i].total_steps << '\n';
    }
  }
  return kOk;
}

int cmd_sweep(const Globals& g, const std::vector<double>& intervals, int trials) {
  const ScenarioConfig cfg = load(g);
  const Scenario s = to_scenario(cfg);
  const auto rows = sweep_rotation_intervals(s, intervals, trials);
  std::ostringstream os;
  write_sweep_csv(os, rows);
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_file(dir / "sweep.csv", os.str());
  std::cout << os.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipetbench: pipetting robot planning and correction bench"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "scenario seed, overrides the config");
  app.add_option("--config", g.config, "scenario JSON file");
  app.add_option("--out-dir", g.out_dir, "output directory, overrides the config");
  app.add_flag("--verbose", g.verbose, "extra per-item output");

  auto* spiral = app.add_subcommand("spiral", "build the correction lattice");
  double e_mm = 0.0, d_mm = 0.0;
  std::string spiral_out;
  spiral->add_option("--e-mm", e_mm, "acceptable residual e in mm")->required()->check(CLI::PositiveNumber);
  spiral->add_option("--d-mm", d_mm, "tip pitch d in mm")->required()->check(CLI::PositiveNumber);
  spiral->add_option("--out", spiral_out, "write class_id,x_mm,y_mm CSV here");

  auto* patterns = app.add_subcommand("patterns", "count neighbour availability patterns");
  bool list_routine = false;
  std::string target;
  patterns->add_flag("--list-routine", list_routine, "print the masks met along the picking routine");
  patterns->add_option("--target", target, "enumerate the patterns of one target kind")
      ->check(CLI::IsMember({"interior", "edge", "corner"}));

  auto* plan = app.add_subcommand("plan", "plan one dispense cycle and write its trajectories");

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo tip pick-up runs");
  std::string mode;
  int trials = 1;
  simulate->add_option("--mode", mode, "correction mode")->check(CLI::IsMember({"open", "closed"}));
  simulate->add_option("--trials", trials, "number of runs")->check(CLI::Range(1, 100000));

  auto* sweep = app.add_subcommand("sweep", "success and steps against the training rotation interval");
  std::vector<double> intervals{5, 10, 20, 30, 45};
  int sweep_trials = 1;
  sweep->add_option("--intervals", intervals, "rotation intervals in degrees")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  sweep->add_option("--trials", sweep_trials, "runs per interval")->check(CLI::Range(1, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*spiral) return cmd_spiral(e_mm, d_mm, spiral_out);
    if (*patterns) return cmd_patterns(list_routine, target);
    if (*plan) return cmd_plan(g);
    if (*simulate) return cmd_simulate(g, mode, trials);
    if (*sweep) return cmd_sweep(g, intervals, sweep_trials);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
