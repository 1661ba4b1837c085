#include <gtest/gtest.h>

#include <random>

#include "rbk/elastic.hpp"
#include "rbk/replanner.hpp"

using namespace rbk;
using bspline::PointList;
using bspline::Vec3;
using replan::PlanState;
using replan::PointLabel;

namespace {

constexpr int kK = 6;
constexpr double kSimStep = 0.05;

const auto kTables = bspline::BasisTables::make(bspline::UniformBsplineSpec{});

env::WorldPtr world_of(PointList obstacles) {
  return env::OccupancyWorld::build(std::move(obstacles), env::GridSpec{}, env::Clearances{});
}

// A vertical column of obstacle points through `at`.
PointList column(const Vec3& at, double half_height = 0.5) {
  PointList pts;
  for (double dz = -half_height; dz <= half_height + 1e-9; dz += 1.0 / 12.0) {
    pts.push_back(at + Vec3(0, 0, dz));
  }
  return pts;
}

PointList merged(PointList a, const PointList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

int count_events(const PlanState& s, const std::string& kind, std::size_t from = 0) {
  int n = 0;
  for (std::size_t i = from; i < s.events.size(); ++i) n += s.events[i].kind == kind;
  return n;
}

void expect_labels_contiguous(const PlanState& s, int window) {
  const int n = static_cast<int>(s.points.size());
  int optimizing = 0;
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      EXPECT_LE(s.label(i - 1, window), s.label(i, window));
    }
    optimizing += s.label(i, window) == PointLabel::kOptimizing;
  }
  EXPECT_EQ(optimizing, std::min(window, n - s.committed_end));
}

void expect_all_spans_feasible(const PointList& pts) {
  for (int j = 0; j + kK <= static_cast<int>(pts.size()); ++j) {
    EXPECT_TRUE(bspline::span_feasible(*kTables, bspline::make_span(pts, j, kK).points, 1e-9))
        << "span " << j;
  }
}

// Derivatives up to order k-2 agree across every knot from span `from` on.
void expect_continuous(const PointList& pts, int from) {
  const bspline::Trajectory traj(kTables, pts);
  for (int j = std::max(from, 1); j < traj.span_count(); ++j) {
    for (int l = 0; l <= kK - 2; ++l) {
      const Vec3 left = traj.evaluate_span(j - 1, 1.0, l);
      const Vec3 right = traj.evaluate_span(j, 0.0, l);
      EXPECT_LT((left - right).norm(), 1e-6 * std::max(1.0, left.norm())) << "knot " << j << " l=" << l;
    }
  }
}

}  // namespace

TEST(Replanner, PassiveHoverToNearbyGoalNeverReplans) {
  const replan::Planner planner(kTables, {});
  const auto world = world_of({});
  PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(3, 2, 1), world);
  EXPECT_EQ(s.local_target, s.global_goal);
  EXPECT_EQ(s.replans, 1);
  expect_all_spans_feasible(s.points);
  int executed = s.executed_end;
  for (int i = 0; i < 400 && !s.reached; ++i) {
    planner.step(s, world, kSimStep);
    EXPECT_GE(s.executed_end, executed);
    executed = s.executed_end;
    expect_labels_contiguous(s, planner.config().window);
  }
  EXPECT_TRUE(s.reached);
  EXPECT_FALSE(s.halted);
  EXPECT_EQ(s.replans, 1);
  EXPECT_EQ(count_events(s, "stop"), 0);
  EXPECT_LT((planner.position(s) - s.global_goal).norm(), 1e-9);
  expect_all_spans_feasible(s.points);
}

TEST(Replanner, FarGoalPutsTheTargetAtTheSensingBoundary) {
  const replan::Planner planner(kTables, {});
  const auto world = world_of({});
  const Vec3 start(1, 1, 1), goal(9, 1, 1);
  PlanState s = planner.init_plan(start, goal, world);
  const Vec3 snapped_start = world->center(world->cell_of(start));
  EXPECT_NEAR((s.local_target - snapped_start).norm(), planner.config().sensing_range,
              world->grid().resolution);
  EXPECT_NEAR(s.local_target.y(), snapped_start.y(), 1e-12);
  EXPECT_NE(s.local_target, s.global_goal);
}

TEST(Replanner, InitialPlanIsFeasibleAndClear) {
  PointList obstacles;
  for (double y = 0.0; y <= 3.0; y += 0.1) obstacles = merged(obstacles, column(Vec3(3.0, y, 1.0), 1.0));
  const auto world = world_of(obstacles);
  const replan::Planner planner(kTables, {});
  const PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(5, 1, 1), world);
  expect_all_spans_feasible(s.points);
  const int spans = int(s.points.size()) - kK + 1;
  EXPECT_GT(elastic::sampled_clearance(*kTables, s.points, *world, 0, spans - 1, 20),
            world->clearances().robot_radius);
}

TEST(Replanner, InsertionOnUnoptimizedPartReplansAndKeepsThePrefix) {
  replan::ReplanConfig config;
  config.window = 4;
  const replan::Planner planner(kTables, config);
  const auto empty = world_of({});
  PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(4, 1, 1), empty);
  for (int i = 0; i < 4; ++i) planner.step(s, empty, kSimStep);
  ASSERT_EQ(s.replans, 1);

  const int j = s.optimizing_end(config.window) + 1;
  ASSERT_LT(j + kK, static_cast<int>(s.points.size()));
  const bspline::Trajectory before_traj(kTables, s.points, s.t0);
  const Vec3 hit = before_traj.evaluate_span(j, 0.5, 0);
  ASSERT_LT((hit - planner.position(s)).norm(), 3.5);
  const auto world = world_of(column(hit));

  const PlanState before = s;
  const auto committed_before = replan::committed_trajectory(planner, before);
  planner.step(s, world, kSimStep);

  ASSERT_EQ(count_events(s, "stop"), 0);
  ASSERT_EQ(s.replans, 2);
  const auto& ev = s.events.back();
  EXPECT_EQ(ev.kind, "replan");
  EXPECT_NE(ev.detail.find("trigger=collision"), std::string::npos) << ev.detail;
  EXPECT_NE(ev.detail.find("status=success"), std::string::npos) << ev.detail;
  ASSERT_FALSE(s.timings.empty());
  EXPECT_GE(s.timings.back().rbk, 0.0);
  EXPECT_GE(s.timings.back().optimization, 0.0);

  // The committed prefix is untouched, bit for bit.
  ASSERT_GE(s.committed_end, before.committed_end);
  for (int i = 0; i < before.committed_end; ++i) EXPECT_EQ(s.points[i], before.points[i]);
  const auto committed_after = replan::committed_trajectory(planner, s);
  for (double t = committed_before.start_time(); t <= committed_before.end_time(); t += 0.01) {
    for (int l = 0; l <= 2; ++l) {
      EXPECT_LE((committed_before.evaluate(t, l) - committed_after.evaluate(t, l)).norm(), 1e-12);
    }
  }
  expect_continuous(s.points, before.committed_end - kK);
  expect_all_spans_feasible(s.points);
  const int spans = int(s.points.size()) - kK + 1;
  EXPECT_GT(elastic::sampled_clearance(*kTables, s.points, *world, s.executed_end, spans - 1, 20),
            world->clearances().robot_radius);
}

TEST(Replanner, ObstacleOnCommittedSegmentStops) {
  const replan::Planner planner(kTables, {});
  const auto empty = world_of({});
  PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(4, 1, 1), empty);
  for (int i = 0; i < 10; ++i) planner.step(s, empty, kSimStep);
  const int jc = s.executed_end;
  // A span whose control points are all committed, ahead of the vehicle.
  const int j = s.committed_end - kK;
  ASSERT_GT(j, jc);
  const bspline::Trajectory traj(kTables, s.points, s.t0);
  const auto world = world_of(column(traj.evaluate_span(j, 0.5, 0)));
  const PointList points = s.points;
  planner.step(s, world, kSimStep);
  EXPECT_TRUE(s.halted);
  EXPECT_EQ(s.events.back().kind, "stop");
  EXPECT_EQ(s.points, points);
  // A halted plan ignores further steps.
  const auto events = s.events.size();
  planner.step(s, world, kSimStep);
  EXPECT_EQ(s.events.size(), events);
}

TEST(Replanner, ActiveModeReplansOnTheKnotTimer) {
  replan::ReplanConfig config;
  config.mode = replan::Mode::kActive;
  const replan::Planner planner(kTables, config);
  const auto world = world_of({});
  PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(3.5, 1, 1), world);
  ASSERT_EQ(s.local_target, s.global_goal);
  for (int i = 0; i < 60 && !s.reached; ++i) planner.step(s, world, kSimStep);
  int timers = 0;
  for (const auto& e : s.events) {
    if (e.kind != "replan" || e.detail.find("trigger=timer") == std::string::npos) continue;
    ++timers;
    EXPECT_NE(e.detail.find("knots=" + std::to_string(config.window / 2) + " "), std::string::npos)
        << e.detail;
  }
  EXPECT_GE(timers, 2);
  EXPECT_EQ(s.replans, timers + 1);
}

TEST(Replanner, CommittedTrajectoryIsBoundedAndFeasible) {
  const replan::Planner planner(kTables, {});
  const auto world = world_of({});
  PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(8, 6, 2), world);
  for (int i = 0; i < 30; ++i) planner.step(s, world, kSimStep);
  const auto committed = replan::committed_trajectory(planner, s);
  const Vec3 now = committed.evaluate(s.clock);
  EXPECT_TRUE(now.allFinite());
  EXPECT_TRUE((now.array() >= world->grid().lower_corner().array()).all());
  EXPECT_TRUE((now.array() <= world->grid().upper_corner().array()).all());
  EXPECT_THROW(committed.evaluate(committed.end_time() + 0.01), std::out_of_range);
  EXPECT_THROW(committed.evaluate(committed.start_time() - 0.01), std::out_of_range);
  for (double t = committed.start_time(); t <= committed.end_time(); t += 0.005) {
    EXPECT_LE(committed.evaluate(t, 1).cwiseAbs().maxCoeff(), 2.0 + 1e-9);
    EXPECT_LE(committed.evaluate(t, 2).cwiseAbs().maxCoeff(), 3.0 + 1e-9);
  }
}

TEST(Replanner, InitFailureIsReported) {
  // A closed shell of obstacles around the start.
  PointList cage;
  const Vec3 start(1.0 + 1.0 / 12.0, 1.0 + 1.0 / 12.0, 1.0 + 1.0 / 12.0);
  for (double a = 0.0; a < M_PI; a += 0.05) {
    for (double b = 0.0; b < 2 * M_PI; b += 0.05) {
      cage.push_back(start + 0.6 * Vec3(std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)));
    }
  }
  const replan::Planner planner(kTables, {});
  EXPECT_THROW(planner.init_plan(start, Vec3(5, 1, 1), world_of(cage)), std::runtime_error);
}

TEST(Replanner, EventLinesAreParseable) {
  const replan::Event e{1.25, "commit", "points=11..13"};
  EXPECT_EQ(e.line(), "t=1.25 event=commit detail=points=11..13");
}

TEST(Replanner, DeterministicRuns) {
  auto run = [] {
    const replan::Planner planner(kTables, {});
    const auto world = world_of(column(Vec3(4, 4, 1), 1.0));
    PlanState s = planner.init_plan(Vec3(1, 1, 1), Vec3(8, 8, 1), world);
    for (int i = 0; i < 100 && !s.reached && !s.halted; ++i) planner.step(s, world, kSimStep);
    return s;
  };
  const PlanState a = run(), b = run();
  EXPECT_EQ(a.points, b.points);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].kind, b.events[i].kind);
    EXPECT_EQ(a.events[i].time, b.events[i].time);
  }
}
