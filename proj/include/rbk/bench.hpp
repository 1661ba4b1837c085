#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rbk/bspline.hpp"
#include "rbk/replanner.hpp"
#include "rbk/scenario.hpp"

namespace rbk::bench {

struct TimingRow {
  double avg = 0.0;
  double max = 0.0;
  double std = 0.0;  // population standard deviation
  int count = 0;

  static TimingRow of(const std::vector<double>& samples);
};

struct RunStats {
  TimingRow rbk;
  TimingRow tube;
  TimingRow trajectory_opt;  // QCQP solve
  TimingRow total_opt;       // tube + QCQP + safety enforcement
  int replans = 0;
  int replan_failures = 0;
  int collision_replans = 0;
  int opt_calls = 0;
  int goals_reached = 0;
  int stops = 0;

  // Over the flown trajectory, sampled.
  double mean_speed = 0.0;
  double max_axis_velocity = 0.0;
  double max_axis_acceleration = 0.0;
  double length = 0.0;
  double duration = 0.0;
  double min_clearance = 0.0;

  // Invariant audit.
  int invariant_violations = 0;
  int prefix_violations = 0;
  int continuity_violations = 0;
  int feasibility_violations = 0;
  int clearance_violations = 0;
  int eo_calls = 0;
  int eo_objective_violations = 0;
  int eo_constraint_violations = 0;
  int eo_pin_violations = 0;
  int eo_rejected = 0;

  bool success = false;
  std::string failure;
};

struct RunResult {
  RunStats stats;
  replan::PlanState state;
  std::vector<std::string> event_lines;
  std::shared_ptr<const bspline::BasisTables> tables;
  // Obstacles the vehicle faced, for post-hoc checks.
  env::WorldPtr final_world;
};

RunResult run_scenario(const Scenario& scenario);

// Timing rows and counters rebuilt from event log lines alone.
RunStats stats_from_events(const std::vector<std::string>& lines);

void write_stats_csv(std::ostream& out, const RunStats& stats);

// Header comments, then t,x,y,z,vx,vy,vz,ax,ay,az rows, then a
// "# control_points" section of i,x,y,z rows. Doubles use %.17g.
void write_trajectory_csv(std::ostream& out, const bspline::Trajectory& trajectory,
                          double sample_step);

struct TrajectoryFile {
  int k = 0;
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<std::array<double, 10>> rows;
  bspline::PointList control_points;
};

TrajectoryFile read_trajectory_csv(std::istream& in);

// Python/matplotlib script that plots `data_file`.
void write_plot_script(std::ostream& out, const std::string& data_file);

}  // namespace rbk::bench
