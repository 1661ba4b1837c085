#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbk/baselines.hpp"
#include "rbk/bspline.hpp"
#include "rbk/env.hpp"

namespace rbk::bench {

// Small flat grid where the full span search is tractable.
struct CompareConfig {
  int trials = 50;
  Eigen::Vector2i grid = Eigen::Vector2i(14, 14);
  double resolution = 1.0 / 6.0;
  int obstacle_cells = 12;
  int min_goal_cells = 5;  // Chebyshev distance between start and goal
  std::uint64_t seed = 2018;
  bspline::UniformBsplineSpec spline;
  // Only the raw cells block; the study isolates search quality.
  env::Clearances clearances{0.02, 0.01, 0.0};
  baselines::FullSearchOptions oracle;
};

struct TrialRecord {
  int trial = 0;
  bool skipped = false;
  std::string reason;
  bool moving_start = false;
  double time_weight = 0.0;

  double oracle_cost = 0.0;
  double oracle_seconds = 0.0;
  std::size_t oracle_states = 0;

  bool rbk_ok = false;
  double rbk_cost = 0.0;
  double rbk_seconds = 0.0;

  bool astar_found = false;
  bool astar_feasible = false;
  int astar_infeasible_spans = 0;
  double astar_cost = 0.0;
  double astar_seconds = 0.0;

  double rbk_ratio() const { return rbk_cost / oracle_cost; }
  double astar_ratio() const { return astar_cost / oracle_cost; }
};

struct CompareSummary {
  int completed = 0;
  int skipped = 0;
  int rbk_failures = 0;  // oracle found a path, RBK did not
  int rbk_optimal = 0;  // ratio within 1e-9 of 1
  int oracle_dominance_violations = 0;
  int rbk_worse_than_feasible_astar = 0;
  int astar_feasible = 0;
  int astar_infeasible_moving = 0;
  int moving_starts = 0;
  double mean_rbk_ratio = 0.0;
  double max_rbk_ratio = 0.0;
  double mean_oracle_seconds = 0.0;
  double mean_rbk_seconds = 0.0;
  double mean_astar_seconds = 0.0;
  double speedup = 0.0;  // mean oracle time / mean RBK time
};

struct CompareReport {
  std::vector<TrialRecord> trials;
  CompareSummary summary;
};

// One trial: random obstacle cells, a random start cell with a random
// feasible span pattern, a static goal. Deterministic in (seed, trial).
TrialRecord run_trial(const CompareConfig& config, int trial);

CompareReport monte_carlo_compare(const CompareConfig& config);

void write_compare_csv(std::ostream& out, const CompareReport& report);

}  // namespace rbk::bench
