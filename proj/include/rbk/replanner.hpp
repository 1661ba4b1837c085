#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rbk/bspline.hpp"
#include "rbk/elastic.hpp"
#include "rbk/env.hpp"
#include "rbk/rbk_search.hpp"

namespace rbk::replan {

using bspline::PointList;
using bspline::Vec3;

enum class Mode { kPassive, kActive };
enum class TriggerKind { kCollision, kTimer, kGoalMoved };
enum class PointLabel { kExecuted, kCommitted, kOptimizing, kUnoptimized };

const char* to_string(Mode mode);
const char* to_string(TriggerKind kind);
const char* to_string(PointLabel label);

struct ReplanConfig {
  int window = 12;
  double sensing_range = 4.0;
  Mode mode = Mode::kPassive;
  int timer_knots = 0;  // 0: window / 2
  // <= 0 picks a weight once from the first search and keeps it.
  double time_weight = 0.0;
  double v_max = 3.5;
  int connectivity = 26;
  std::size_t expansion_budget = 0;
  // A new local target further than this from the current one re-plans.
  double target_update_distance = 1.0;
  bool optimize = true;
  elastic::QcqpOptions qcqp;
  int samples_per_span = 20;
  int safety_rounds = 16;
};

struct ReplanTrigger {
  TriggerKind kind = TriggerKind::kCollision;
  std::string detail;
};

struct Event {
  double time = 0.0;
  std::string kind;  // replan | opt | commit | stop | goal
  std::string detail;
  std::string line() const;  // "t=<s> event=<kind> detail=<detail>"
};

// Wall-clock seconds of one back-end or front-end call.
struct ComponentTiming {
  double rbk = -1.0;
  double tube = -1.0;
  double qcqp = -1.0;
  double optimization = -1.0;  // tube + qcqp + safety
};

// Outcome of one elastic optimization pass, kept for audits.
struct OptimizationRecord {
  double initial_objective = 0.0;
  double objective = 0.0;
  double max_violation = 0.0;
  bool endpoints_pinned = true;
  bool rejected = false;
  bool accepted = false;
};

// Control points labeled by index: [0, executed_end) executed,
// [executed_end, committed_end) committed, then up to `window` optimizing,
// the rest unoptimized. Span j covers [t0 + j dt, t0 + (j + 1) dt].
struct PlanState {
  PointList points;
  double t0 = 0.0;
  double clock = 0.0;
  int executed_end = 0;
  int committed_end = 0;
  Vec3 global_goal = Vec3::Zero();
  Vec3 local_target = Vec3::Zero();
  double time_weight = 0.0;
  bool halted = false;
  bool reached = false;
  int knots_since_replan = 0;

  std::vector<Event> events;
  std::vector<ComponentTiming> timings;
  std::vector<OptimizationRecord> optimizations;
  int replans = 0;
  int replan_failures = 0;
  int opt_calls = 0;

  int optimizing_end(int window) const;
  PointLabel label(int index, int window) const;
};

class Planner {
 public:
  Planner(std::shared_ptr<const bspline::BasisTables> tables, ReplanConfig config);

  const ReplanConfig& config() const { return config_; }
  const bspline::BasisTables& tables() const { return *tables_; }
  const std::shared_ptr<const bspline::BasisTables>& tables_ptr() const { return tables_; }

  // Plans from a hover at `start`. Throws std::runtime_error when the first
  // search fails.
  PlanState init_plan(const Vec3& start, const Vec3& goal, const env::WorldPtr& world) const;

  // Advances the clock by dt_sim and reacts to `world` as seen from the
  // current position.
  void step(PlanState& state, const env::WorldPtr& world, double dt_sim) const;

  // Swaps the global goal of a plan that is hovering or on its way.
  void retarget(PlanState& state, const Vec3& goal, const env::WorldPtr& world) const;

  Vec3 position(const PlanState& state) const;

  // Straight guide line toward the goal, cut at the sensing range, moved to
  // the nearest free cell when blocked.
  Vec3 local_target(const env::OccupancyWorld& view, const Vec3& from, const Vec3& goal) const;

 private:
  env::WorldPtr view_of(const env::WorldPtr& world, const Vec3& at) const;
  int current_span(const PlanState& state) const;
  bool replan(PlanState& state, const env::WorldPtr& view, const ReplanTrigger& trigger) const;
  void optimize_window(PlanState& state, const env::OccupancyWorld& view) const;
  // First span index j >= from whose sampled clearance is <= robot radius,
  // or -1.
  int first_colliding_span(const PlanState& state, const env::OccupancyWorld& view,
                           int from) const;

  std::shared_ptr<const bspline::BasisTables> tables_;
  ReplanConfig config_;
};

// Evaluation over executed + committed spans only.
class CommittedTrajectory {
 public:
  CommittedTrajectory(std::shared_ptr<const bspline::BasisTables> tables, const PlanState& state);

  double start_time() const { return trajectory_.start_time(); }
  double end_time() const { return trajectory_.end_time(); }
  // Throws std::out_of_range outside [start_time, end_time].
  Vec3 evaluate(double t, int order = 0) const;
  const PointList& points() const { return trajectory_.points(); }

 private:
  bspline::Trajectory trajectory_;
};

CommittedTrajectory committed_trajectory(const Planner& planner, const PlanState& state);

}  // namespace rbk::replan
