#include "rbk/replanner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace rbk::replan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::kActive ? "active" : "passive"; }

const char* to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::kCollision:
      return "collision";
    case TriggerKind::kTimer:
      return "timer";
    case TriggerKind::kGoalMoved:
      return "goal-moved";
  }
  return "unknown";
}

const char* to_string(PointLabel label) {
  switch (label) {
    case PointLabel::kExecuted:
      return "executed";
    case PointLabel::kCommitted:
      return "committed";
    case PointLabel::kOptimizing:
      return "optimizing";
    case PointLabel::kUnoptimized:
      return "unoptimized";
  }
  return "unknown";
}

std::string Event::line() const {
  return "t=" + format_double(time) + " event=" + kind + " detail=" + detail;
}

int PlanState::optimizing_end(int window) const {
  return std::min(static_cast<int>(points.size()), committed_end + window);
}

PointLabel PlanState::label(int index, int window) const {
  if (index < executed_end) return PointLabel::kExecuted;
  if (index < committed_end) return PointLabel::kCommitted;
  if (index < optimizing_end(window)) return PointLabel::kOptimizing;
  return PointLabel::kUnoptimized;
}

Planner::Planner(std::shared_ptr<const bspline::BasisTables> tables, ReplanConfig config)
    : tables_(std::move(tables)), config_(std::move(config)) {
  if (!tables_) throw std::invalid_argument("planner needs basis tables");
  if (config_.window < 2) throw std::invalid_argument("window must be >= 2");
  if (!(config_.sensing_range > 0.0)) throw std::invalid_argument("sensing range must be > 0");
  if (config_.timer_knots <= 0) config_.timer_knots = std::max(1, config_.window / 2);
}

env::WorldPtr Planner::view_of(const env::WorldPtr& world, const Vec3& at) const {
  return world->crop(at, config_.sensing_range);
}

int Planner::current_span(const PlanState& state) const {
  const int spans = static_cast<int>(state.points.size()) - tables_->k() + 1;
  const int j = static_cast<int>(std::floor((state.clock - state.t0) / tables_->dt()));
  return std::clamp(j, 0, spans - 1);
}

Vec3 Planner::position(const PlanState& state) const {
  const bspline::Trajectory traj(tables_, state.points, state.t0);
  return traj.evaluate(state.clock, 0);
}

Vec3 Planner::local_target(const env::OccupancyWorld& view, const Vec3& from,
                           const Vec3& goal) const {
  const Vec3 delta = goal - from;
  const double dist = delta.norm();
  Vec3 target = dist <= config_.sensing_range ? goal : from + delta / dist * config_.sensing_range;
  const auto& grid = view.grid();
  env::Cell cell = view.cell_of(target);
  for (int a = 0; a < 3; ++a) cell(a) = std::clamp(cell(a), 0, grid.dims(a) - 1);
  if (view.free(cell, env::ClearanceLevel::kRbk)) return view.center(cell);

  // Nearest free cell by center distance; ties to the lowest linear index.
  const Vec3 anchor = view.center(cell);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int reach : {12, std::max({grid.dims.x(), grid.dims.y(), grid.dims.z()})}) {
    const env::Cell lo = (cell.array() - reach).max(0).matrix();
    const env::Cell hi = (cell.array() + reach).min(grid.dims.array() - 1).matrix();
    for (int z = lo.z(); z <= hi.z(); ++z) {
      for (int y = lo.y(); y <= hi.y(); ++y) {
        for (int x = lo.x(); x <= hi.x(); ++x) {
          const env::Cell c(x, y, z);
          if (!view.free(c, env::ClearanceLevel::kRbk)) continue;
          const double d = (view.center(c) - anchor).squaredNorm();
          const int idx = view.linear_index(c);
          if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
          }
        }
      }
    }
    if (best >= 0) break;
  }
  if (best < 0) return view.center(cell);
  return view.center(view.cell_from_index(best));
}

int Planner::first_colliding_span(const PlanState& state, const env::OccupancyWorld& view,
                                  int from) const {
  const int spans = static_cast<int>(state.points.size()) - tables_->k() + 1;
  const double radius = view.clearances().robot_radius;
  for (int j = std::max(from, 0); j < spans; ++j) {
    if (elastic::sampled_clearance(*tables_, state.points, view, j, j,
                                   config_.samples_per_span) <= radius) {
      return j;
    }
  }
  return -1;
}

namespace {

bool spans_feasible(const bspline::BasisTables& tables, const PointList& points, int from) {
  const int k = tables.k();
  Eigen::MatrixX3d span(k, 3);
  for (int j = std::max(from, 0); j + k <= static_cast<int>(points.size()); ++j) {
    for (int i = 0; i < k; ++i) span.row(i) = points[j + i].transpose();
    if (!bspline::span_feasible(tables, span, 1e-9)) return false;
  }
  return true;
}

struct Polished {
  PointList points;
  bool ok = false;
  bool optimized = false;
  ComponentTiming timing;
  std::optional<OptimizationRecord> record;
};

// Optimizes the window that starts at mutable index `f`, then enforces
// clearance; falls back to the unoptimized placement when the optimized
// one cannot be made safe and feasible.
Polished polish(const bspline::BasisTables& tables, const ReplanConfig& config,
                const env::OccupancyWorld& view, PointList points, int f) {
  const int k = tables.k();
  const int n = static_cast<int>(points.size());
  Polished out;
  std::vector<PointList> candidates;
  const int first = f - 1;
  const int last = std::min(f + config.window, n - k);
  if (config.optimize && first >= 0 && last - first >= 2) {
    const auto opt_start = Clock::now();
    const PointList placement(points.begin() + first, points.begin() + last + 1);
    auto t = Clock::now();
    const elastic::ElasticTube tube =
        elastic::elastic_tube(placement, view, elastic::TubeParams::for_world(view, config.sensing_range));
    out.timing.tube = seconds_since(t);
    elastic::PlacementProblem problem =
        elastic::make_placement_problem(tables, points, first, last, tube);
    const auto& grid = view.grid();
    problem.box = std::make_pair(grid.lower_corner(), grid.upper_corner());
    t = Clock::now();
    const elastic::QcqpResult solved = elastic::solve_placement_qcqp(problem, config.qcqp);
    out.timing.qcqp = seconds_since(t);
    OptimizationRecord rec;
    rec.initial_objective = solved.initial_objective;
    rec.objective = solved.objective;
    rec.rejected = solved.rejected;
    rec.max_violation = elastic::max_constraint_violation(problem, solved.points);
    rec.endpoints_pinned =
        solved.points[first] == points[first] && solved.points[last] == points[last];
    if (!solved.rejected) candidates.push_back(solved.points);
    out.record = rec;
    out.optimized = true;
    candidates.push_back(points);
    elastic::SafetyParams safety;
    safety.robot_radius = view.clearances().robot_radius;
    safety.samples_per_span = config.samples_per_span;
    safety.max_rounds = config.safety_rounds;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto result = elastic::enforce_safety(tables, candidates[c], f, std::max(0, f - k + 1),
                                            view, safety);
      if (result.safe && spans_feasible(tables, result.points, f - k + 1)) {
        out.points = std::move(result.points);
        out.ok = true;
        if (c == 0 && !solved.rejected) out.record->accepted = true;
        break;
      }
    }
    out.timing.optimization = seconds_since(opt_start);
    return out;
  }
  elastic::SafetyParams safety;
  safety.robot_radius = view.clearances().robot_radius;
  safety.samples_per_span = config.samples_per_span;
  safety.max_rounds = config.safety_rounds;
  auto result =
      elastic::enforce_safety(tables, std::move(points), f, std::max(0, f - k + 1), view, safety);
  if (result.safe && spans_feasible(tables, result.points, f - k + 1)) {
    out.points = std::move(result.points);
    out.ok = true;
  }
  return out;
}

std::string timing_detail(const ComponentTiming& t) {
  std::string s;
  if (t.rbk >= 0.0) s += " rbk_s=" + format_double(t.rbk);
  if (t.tube >= 0.0) s += " tube_s=" + format_double(t.tube);
  if (t.qcqp >= 0.0) s += " qcqp_s=" + format_double(t.qcqp);
  if (t.optimization >= 0.0) s += " opt_s=" + format_double(t.optimization);
  return s;
}

}  // namespace

bool Planner::replan(PlanState& state, const env::WorldPtr& view,
                     const ReplanTrigger& trigger) const {
  const int k = tables_->k();
  const int f = state.committed_end;
  const Vec3 pos = position(state);
  const Vec3 target = local_target(*view, pos, state.global_goal);
  const env::GridGraph graph(view, env::ClearanceLevel::kRbk, config_.connectivity);

  search::SearchQuery query;
  query.init.assign(state.points.begin() + (f - k), state.points.begin() + f);
  query.goal = search::static_span(target, k);
  query.tables = tables_;
  query.graph = &graph;
  query.v_max = config_.v_max;
  query.expansion_budget = config_.expansion_budget;
  if (state.time_weight <= 0.0) {
    state.time_weight = config_.time_weight > 0.0
                            ? config_.time_weight
                            : search::auto_time_weight(*tables_, query.init, target, graph);
  }
  query.time_weight = state.time_weight;

  ComponentTiming timing;
  const auto t = Clock::now();
  search::SearchResult found;
  std::string failure;
  try {
    found = search::rbk_search(query);
  } catch (const std::exception& e) {
    failure = e.what();
  }
  timing.rbk = seconds_since(t);
  ++state.replans;
  state.knots_since_replan = 0;

  std::string detail = std::string("trigger=") + to_string(trigger.kind);
  if (!trigger.detail.empty()) detail += ":" + trigger.detail;
  if (!found.ok()) {
    ++state.replan_failures;
    state.timings.push_back(timing);
    detail += std::string(" status=") + (failure.empty() ? search::to_string(found.status) : "error");
    state.events.push_back({state.clock, "replan", detail + timing_detail(timing)});
    return false;
  }

  PointList candidate(state.points.begin(), state.points.begin() + f);
  candidate.insert(candidate.end(), found.points.begin() + k, found.points.end());
  Polished polished = polish(*tables_, config_, *view, std::move(candidate), f);
  timing.tube = polished.timing.tube;
  timing.qcqp = polished.timing.qcqp;
  timing.optimization = polished.timing.optimization;
  state.timings.push_back(timing);
  if (polished.optimized) ++state.opt_calls;
  if (polished.record) state.optimizations.push_back(*polished.record);
  if (!polished.ok) {
    ++state.replan_failures;
    state.events.push_back({state.clock, "replan", detail + " status=unsafe" + timing_detail(timing)});
    return false;
  }
  state.points = std::move(polished.points);
  state.local_target = target;
  state.events.push_back({state.clock, "replan",
                          detail + " status=success points=" + std::to_string(state.points.size()) +
                              timing_detail(timing)});
  return true;
}

void Planner::optimize_window(PlanState& state, const env::OccupancyWorld& view) const {
  if (!config_.optimize) return;
  Polished polished = polish(*tables_, config_, view, state.points, state.committed_end);
  if (!polished.optimized) return;
  ++state.opt_calls;
  state.timings.push_back(polished.timing);
  if (polished.record) state.optimizations.push_back(*polished.record);
  const bool accepted = polished.ok;
  if (accepted) state.points = std::move(polished.points);
  state.events.push_back({state.clock, "opt",
                          std::string("accepted=") + (accepted ? "1" : "0") +
                              timing_detail(polished.timing)});
}

PlanState Planner::init_plan(const Vec3& start, const Vec3& goal,
                             const env::WorldPtr& world) const {
  const int k = tables_->k();
  PlanState state;
  const env::Cell start_cell = world->cell_of(start);
  const env::Cell goal_cell = world->cell_of(goal);
  if (!world->in_bounds(start_cell) || !world->in_bounds(goal_cell)) {
    throw std::runtime_error("init_plan: start or goal outside the map");
  }
  const Vec3 s = world->center(start_cell);
  state.global_goal = world->center(goal_cell);
  state.points = search::static_span(s, k);
  state.committed_end = k;
  state.local_target = s;
  const env::WorldPtr view = view_of(world, s);
  if (!replan(state, view, {TriggerKind::kGoalMoved, "init"})) {
    throw std::runtime_error("init_plan: " + state.events.back().detail);
  }
  state.committed_end = std::min(static_cast<int>(state.points.size()), 2 * k - 1);
  optimize_window(state, *view);
  return state;
}

void Planner::retarget(PlanState& state, const Vec3& goal, const env::WorldPtr& world) const {
  const env::Cell cell = world->cell_of(goal);
  if (!world->in_bounds(cell)) throw std::invalid_argument("retarget: goal outside the map");
  state.global_goal = world->center(cell);
  state.reached = false;
  state.events.push_back({state.clock, "goal", "retarget=" + format_double(state.global_goal.x()) +
                                                   "," + format_double(state.global_goal.y()) +
                                                   "," + format_double(state.global_goal.z())});
  replan(state, view_of(world, position(state)), {TriggerKind::kGoalMoved, "retarget"});
}

void Planner::step(PlanState& state, const env::WorldPtr& world, double dt_sim) const {
  if (!(dt_sim > 0.0)) throw std::invalid_argument("step: dt_sim must be > 0");
  state.clock += dt_sim;
  if (state.halted || state.reached) return;
  const int k = tables_->k();

  const int jc = current_span(state);
  if (jc > state.executed_end) state.knots_since_replan += jc - state.executed_end;
  state.executed_end = std::max(state.executed_end, jc);
  const int n = static_cast<int>(state.points.size());
  const int committed = std::max(state.committed_end, std::min(n, jc + 2 * k - 1));
  const bool window_moved = committed != state.committed_end;
  if (window_moved) {
    state.events.push_back({state.clock, "commit",
                            "points=" + std::to_string(state.committed_end) + ".." +
                                std::to_string(committed)});
    state.committed_end = committed;
  }

  const bool at_goal = state.local_target == state.global_goal;
  if (at_goal && jc >= n - k) {
    state.reached = true;
    state.events.push_back({state.clock, "goal", "reached"});
    return;
  }

  const Vec3 pos = position(state);
  const env::WorldPtr view = view_of(world, pos);
  std::optional<ReplanTrigger> trigger;
  const int colliding = first_colliding_span(state, *view, jc);
  if (colliding >= 0) {
    if (colliding + k - 1 < state.committed_end) {
      state.halted = true;
      // Hold the last executed point.
      state.events.push_back({state.clock, "stop", "span=" + std::to_string(colliding)});
      return;
    }
    trigger = ReplanTrigger{TriggerKind::kCollision, "span=" + std::to_string(colliding)};
  }
  if (!trigger && config_.mode == Mode::kActive &&
      state.knots_since_replan >= config_.timer_knots) {
    trigger = ReplanTrigger{TriggerKind::kTimer, "knots=" + std::to_string(state.knots_since_replan)};
  }
  if (!trigger && !at_goal) {
    const Vec3 target = local_target(*view, pos, state.global_goal);
    if (target == state.global_goal ||
        (target - state.local_target).norm() > config_.target_update_distance) {
      trigger = ReplanTrigger{TriggerKind::kGoalMoved, "target"};
    } else if (n - k - jc <= 2 * k) {
      trigger = ReplanTrigger{TriggerKind::kGoalMoved, "horizon"};
    }
  }
  if (trigger) {
    replan(state, view, *trigger);
  } else if (window_moved) {
    optimize_window(state, *view);
  }
}

CommittedTrajectory::CommittedTrajectory(std::shared_ptr<const bspline::BasisTables> tables,
                                         const PlanState& state)
    : trajectory_(tables,
                  PointList(state.points.begin(), state.points.begin() + state.committed_end),
                  state.t0) {}

Vec3 CommittedTrajectory::evaluate(double t, int order) const {
  if (t < start_time() || t > end_time()) {
    throw std::out_of_range("committed trajectory queried outside its horizon");
  }
  return trajectory_.evaluate(t, order);
}

CommittedTrajectory committed_trajectory(const Planner& planner, const PlanState& state) {
  return CommittedTrajectory(planner.tables_ptr(), state);
}

}  // namespace rbk::replan
