#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rbk/bench.hpp"
#include "rbk/compare.hpp"
#include "rbk/scenario.hpp"

namespace fs = std::filesystem;
using namespace rbk;

namespace {

void print_row(const char* name, const bench::TimingRow& r) {
  std::printf("  %-24s avg %.4f  max %.4f  std %.4f  (n=%d)\n", name, r.avg, r.max, r.std, r.count);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_trajectory(const bspline::Trajectory& traj, const fs::path& path, double step,
                      bool plot) {
  auto out = open_out(path);
  bench::write_trajectory_csv(out, traj, step);
  if (plot) {
    auto script = open_out(fs::path(path).replace_extension(".plot.py"));
    bench::write_plot_script(script, path.filename().string());
  }
}

int run_command(const std::string& file, const std::vector<std::string>& overrides,
                const fs::path& out_dir, bool plot) {
  const bench::Scenario scenario = bench::load_scenario(file, overrides);
  const bench::RunResult result = bench::run_scenario(scenario);
  fs::create_directories(out_dir);
  const fs::path base = out_dir / scenario.name;
  {
    auto events = open_out(base.string() + ".events.log");
    for (const auto& line : result.event_lines) events << line << '\n';
    auto stats = open_out(base.string() + ".stats.csv");
    bench::write_stats_csv(stats, result.stats);
  }
  if (!result.state.points.empty()) {
    const bspline::Trajectory traj(result.tables, result.state.points, result.state.t0);
    write_trajectory(traj, base.string() + ".traj.csv", scenario.sample_step, plot);
  }
  const auto& s = result.stats;
  std::printf("%s: %s\n", scenario.name.c_str(), s.success ? "success" : "FAILED");
  if (!s.success) std::printf("  reason: %s\n", s.failure.c_str());
  print_row("rbk search [s]", s.rbk);
  print_row("tube expansion [s]", s.tube);
  print_row("trajectory opt [s]", s.trajectory_opt);
  print_row("total opt [s]", s.total_opt);
  std::printf("  replans %d (failed %d, on collision %d), opt calls %d, goals %d\n", s.replans,
              s.replan_failures, s.collision_replans, s.opt_calls, s.goals_reached);
  std::printf("  duration %.2f s, length %.2f m, mean speed %.2f m/s\n", s.duration, s.length,
              s.mean_speed);
  std::printf("  max |v_axis| %.3f m/s, max |a_axis| %.3f m/s^2, min clearance %.3f m\n",
              s.max_axis_velocity, s.max_axis_acceleration, s.min_clearance);
  std::printf("  invariant violations %d\n", s.invariant_violations);
  std::printf("  outputs: %s.{traj.csv,stats.csv,events.log}\n", base.string().c_str());
  return s.success ? 0 : 1;
}

int compare_command(int trials, const std::string& grid, std::uint64_t seed, int obstacles,
                    const std::string& out) {
  bench::CompareConfig config;
  config.trials = trials;
  config.seed = seed;
  config.obstacle_cells = obstacles;
  int w = 0, h = 0;
  char x = 0;
  std::istringstream gs(grid);
  if (!(gs >> w >> x >> h) || (x != 'x' && x != 'X') || w < 2 || h < 2) {
    throw std::invalid_argument("--grid must look like 14x14");
  }
  config.grid = Eigen::Vector2i(w, h);
  const bench::CompareReport report = bench::monte_carlo_compare(config);
  if (!out.empty()) {
    auto file = open_out(out);
    bench::write_compare_csv(file, report);
  }
  const auto& s = report.summary;
  std::printf("trials %d completed, %d skipped\n", s.completed, s.skipped);
  std::printf("rbk: mean ratio %.4f, max ratio %.4f, optimal %d, failures %d\n", s.mean_rbk_ratio,
              s.max_rbk_ratio, s.rbk_optimal, s.rbk_failures);
  std::printf("oracle cheaper-or-equal violations %d; rbk worse than feasible A* %d\n",
              s.oracle_dominance_violations, s.rbk_worse_than_feasible_astar);
  std::printf("A* parameterized: %d feasible, %d infeasible of %d moving starts\n", s.astar_feasible,
              s.astar_infeasible_moving, s.moving_starts);
  std::printf("mean time [s]: A* %.6f  rbk %.6f  oracle %.4f  (speedup %.0fx)\n",
              s.mean_astar_seconds, s.mean_rbk_seconds, s.mean_oracle_seconds, s.speedup);
  return 0;
}

int export_command(const std::string& trajectory, const std::string& scenario_file,
                   const std::vector<std::string>& overrides, const std::string& out, double step,
                   bool plot) {
  if (trajectory.empty() == scenario_file.empty()) {
    throw std::invalid_argument("export needs exactly one of --trajectory or --scenario");
  }
  if (!trajectory.empty()) {
    std::ifstream in(trajectory);
    if (!in) throw std::runtime_error("cannot open '" + trajectory + "'");
    const bench::TrajectoryFile file = bench::read_trajectory_csv(in);
    bspline::UniformBsplineSpec spec;
    spec.k = file.k;
    spec.dt = file.dt;
    spec.weights.assign(std::max(file.k - 2, 1), 0.0);
    spec.weights.back() = 1.0;
    spec.bounds.clear();
    const bspline::Trajectory traj(bspline::BasisTables::make(spec), file.control_points, file.t0);
    write_trajectory(traj, out, step, plot);
  } else {
    bench::Scenario scenario = bench::load_scenario(scenario_file, overrides);
    const bench::RunResult result = bench::run_scenario(scenario);
    const bspline::Trajectory traj(result.tables, result.state.points, result.state.t0);
    write_trajectory(traj, out, step > 0.0 ? step : scenario.sample_step, plot);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinodynamic B-spline replanning benchmark"};
  app.require_subcommand(1);

  std::vector<std::string> overrides;
  std::string scenario_file;
  std::string out_dir = "out";
  bool plot = false;
  auto* run = app.add_subcommand("run", "Run a scenario to completion");
  run->add_option("scenario", scenario_file, "Scenario YAML file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a scenario key, e.g. planner.window=10");
  run->add_option("--out-dir", out_dir, "Directory for trajectory, stats and event log");
  run->add_flag("--plot", plot, "Also write a matplotlib script next to the trajectory");

  int trials = 50;
  std::string grid = "14x14";
  std::uint64_t seed = 2018;
  int obstacles = 12;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Monte-Carlo study against the exact span search");
  compare->add_option("--trials", trials, "Number of random instances")->check(CLI::PositiveNumber);
  compare->add_option("--grid", grid, "Grid size WxH");
  compare->add_option("--seed", seed, "Base seed");
  compare->add_option("--obstacles", obstacles, "Obstacle cells per instance");
  compare->add_option("--out", compare_out, "Per-trial CSV");

  std::string traj_in, export_scenario, export_out = "trajectory.csv";
  double step = 0.0;
  auto* exp = app.add_subcommand("export", "Write a sampled trajectory file");
  exp->add_option("--trajectory", traj_in, "Re-sample an existing trajectory file");
  exp->add_option("--scenario", export_scenario, "Run a scenario and export its trajectory");
  exp->add_option("--set", overrides, "Scenario override");
  exp->add_option("--out", export_out, "Output CSV");
  exp->add_option("--step", step, "Sample step in seconds");
  exp->add_flag("--plot", plot, "Also write a matplotlib script");

  auto* defaults = app.add_subcommand("defaults", "Print the default scenario as YAML");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(scenario_file, overrides, out_dir, plot);
    if (*compare) return compare_command(trials, grid, seed, obstacles, compare_out);
    if (*exp) {
      if (!traj_in.empty() && !(step > 0.0)) step = 0.02;
      return export_command(traj_in, export_scenario, overrides, export_out, step, plot);
    }
    if (*defaults) {
      std::cout << bench::to_yaml(bench::Scenario{});
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
