#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rbk/baselines.hpp"
#include "rbk/elastic.hpp"
#include "rbk/rbk_search.hpp"

using namespace rbk;
using bspline::PointList;
using bspline::Vec3;
using env::Cell;

namespace {

const auto kTables = bspline::BasisTables::make(bspline::UniformBsplineSpec{});
constexpr int kK = 6;

env::GridSpec flat_grid(int w, int h) {
  env::GridSpec g;
  g.resolution = 1.0 / 6.0;
  g.dims = Eigen::Vector3i(w, h, 1);
  g.origin = Vec3::Constant(1.0 / 12.0);
  return g;
}

env::WorldPtr world_with_cells(const env::GridSpec& grid, const std::vector<Cell>& blocked,
                               const env::Clearances& c = {0.02, 0.01, 0.0}) {
  PointList pts;
  for (const auto& b : blocked) pts.push_back(grid.origin + b.cast<double>() * grid.resolution);
  return env::OccupancyWorld::build(pts, grid, c);
}

// k points ending at `cell`, stepping by `step` cells per knot.
PointList moving_span(const env::OccupancyWorld& world, const Cell& cell, const Cell& step) {
  PointList pts;
  for (int i = kK - 1; i >= 0; --i) pts.push_back(world.center(cell - i * step));
  return pts;
}

search::SearchQuery make_query(const env::GridGraph& graph, PointList init, const Vec3& goal,
                               double lambda) {
  search::SearchQuery q;
  q.init = std::move(init);
  q.goal = search::static_span(goal, kK);
  q.time_weight = lambda;
  q.tables = kTables;
  q.graph = &graph;
  return q;
}

void expect_valid_result(const search::SearchQuery& q, const search::SearchResult& r) {
  ASSERT_TRUE(r.ok());
  const int n = static_cast<int>(r.points.size());
  for (int i = 0; i < kK; ++i) {
    EXPECT_EQ(r.points[i], q.init[i]);
    EXPECT_EQ(r.points[n - kK + i], q.goal[i]);
  }
  for (int j = 0; j + kK <= n; ++j) {
    EXPECT_TRUE(bspline::check_span_feasible(*kTables, bspline::make_span(r.points, j, kK)).feasible)
        << "span " << j;
  }
  for (int i = kK; i < n - kK + 1; ++i) {
    EXPECT_TRUE(q.graph->free(q.graph->world().cell_of(r.points[i]))) << "point " << i;
  }
  const double recomputed = search::trajectory_cost(*kTables, r.points, q.time_weight);
  EXPECT_NEAR(r.cost, recomputed, 1e-9 * std::max(1.0, recomputed));
}

}  // namespace

TEST(Heuristic, Examples) {
  EXPECT_EQ(search::heuristic(Vec3(1, 2, 3), Vec3(1, 2, 3), 5.0, 3.5), 0.0);
  EXPECT_EQ(search::heuristic(Vec3(0, 0, 0), Vec3(4, 1, 2), 0.0, 3.5), 0.0);
  EXPECT_DOUBLE_EQ(search::heuristic(Vec3(0, 0, 0), Vec3(3, 0, 0), 1.0, 2.0), 1.5);
  EXPECT_THROW(search::heuristic(Vec3::Zero(), Vec3::Zero(), 1.0, 0.0), std::invalid_argument);
}

TEST(NearEnd, CellExact) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const auto goal = bspline::make_span(search::static_span(world->center(Cell(5, 5, 0)), kK), 0, kK);
  auto current = bspline::make_span(moving_span(*world, Cell(5, 5, 0), Cell(1, 0, 0)), 0, kK);
  EXPECT_TRUE(search::near_end(*world, current, goal));
  current.points.row(kK - 1) += Eigen::RowVector3d(0.05, -0.05, 0.0);
  EXPECT_TRUE(search::near_end(*world, current, goal));
  current = bspline::make_span(moving_span(*world, Cell(6, 5, 0), Cell(1, 0, 0)), 0, kK);
  EXPECT_FALSE(search::near_end(*world, current, goal));
}

TEST(RetrieveSpan, StacksPredecessorsOldestFirst) {
  search::SearchTree tree;
  int parent = -1;
  for (int i = 0; i < kK; ++i) {
    search::SearchNode n;
    n.position = Vec3(i, 0, 0);
    n.parent = parent;
    parent = tree.add(n);
  }
  search::SearchNode next;
  next.position = Vec3(kK, 0, 0);
  next.parent = parent;
  const int id = tree.add(next);
  const auto span = search::retrieve_span(tree, id, kK);
  for (int i = 0; i < kK; ++i) EXPECT_EQ(span.points(i, 0), i + 1);
  const auto again = search::retrieve_span(tree, id, kK);
  EXPECT_EQ(span.points, again.points);
  const auto prev = search::retrieve_span(tree, parent, kK);
  EXPECT_EQ(prev.points.bottomRows(kK - 1), span.points.topRows(kK - 1));
  EXPECT_THROW(search::retrieve_span(tree, 2, kK), std::logic_error);
}

TEST(RbkSearch, HoverAtGoalCostsOnlyTime) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const Vec3 p = world->center(Cell(4, 4, 0));
  const auto q = make_query(graph, search::static_span(p, kK), p, 2.0);
  const auto r = search::rbk_search(q);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.points.size(), static_cast<std::size_t>(2 * kK - 1));
  EXPECT_NEAR(r.cost, 2.0 * (2 * kK - 1) * kTables->dt(), 1e-12);
}

TEST(RbkSearch, RejectsInfeasibleStart) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  PointList init;
  for (int i = 0; i < kK; ++i) init.push_back(world->center(Cell(5 + 2 * (i % 2), 5, 0)));
  EXPECT_THROW(search::rbk_search(make_query(graph, init, world->center(Cell(1, 1, 0)), 1.0)),
               std::invalid_argument);
}

TEST(RbkSearch, WalledOffGoalHasNoPath) {
  const auto grid = flat_grid(14, 14);
  std::vector<Cell> wall;
  for (int y = 0; y < 14; ++y) wall.push_back(Cell(7, y, 0));
  const auto world = world_with_cells(grid, wall);
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const Vec3 start = world->center(Cell(2, 2, 0));
  const auto r = search::rbk_search(make_query(graph, search::static_span(start, kK),
                                               world->center(Cell(11, 11, 0)), 1.0));
  EXPECT_EQ(r.status, search::SearchStatus::kNoPath);
}

TEST(RbkSearch, BudgetExhaustionIsATimeout) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  auto q = make_query(graph, search::static_span(world->center(Cell(1, 1, 0)), kK),
                      world->center(Cell(12, 12, 0)), 1.0);
  q.expansion_budget = 3;
  EXPECT_EQ(search::rbk_search(q).status, search::SearchStatus::kTimeout);
}

TEST(RbkSearch, RandomScenariosAreFeasibleAndCostSound) {
  std::mt19937_64 rng(211);
  env::GridSpec grid;
  grid.dims = Eigen::Vector3i(24, 24, 6);
  const env::Clearances clear{0.45, 0.25, 0.15};
  const auto check = elastic::check_two_level_inflation(grid.resolution, 26, clear.rbk, clear.elas,
                                                        clear.robot_radius);
  ASSERT_TRUE(check.ok);
  int successes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_real_distribution<double> ux(0.0, 4.0), uz(0.0, 1.0);
    PointList obstacles;
    for (int p = 0; p < 3; ++p) {
      const double x = ux(rng), y = ux(rng);
      for (double z = 0.0; z <= 1.0; z += grid.resolution) obstacles.push_back(Vec3(x, y, z));
    }
    const auto world = env::OccupancyWorld::build(obstacles, grid, clear);
    const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
    std::uniform_int_distribution<int> cx(5, 18), cz(1, 4);
    const Cell s(cx(rng), cx(rng), cz(rng)), g(cx(rng), cx(rng), cz(rng));
    const Cell step(std::uniform_int_distribution<int>(-1, 1)(rng), 0, 0);
    const auto init = moving_span(*world, s, step);
    bool clear_start = true;
    for (const auto& p : init) clear_start = clear_start && graph.free(world->cell_of(p));
    if (!clear_start || !graph.free(g)) continue;
    const auto q = make_query(graph, init, world->center(g),
                              search::auto_time_weight(*kTables, init, world->center(g), graph));
    const auto r = search::rbk_search(q);
    if (!r.ok()) continue;
    ++successes;
    expect_valid_result(q, r);
    EXPECT_EQ(search::rbk_search(q).points, r.points);
    const int spans = static_cast<int>(r.points.size()) - kK + 1;
    EXPECT_GT(elastic::sampled_clearance(*kTables, r.points, *world, 0, spans - 1, 20),
              clear.robot_radius);
  }
  EXPECT_GE(successes, 60);
}

TEST(RbkSearch, NeverBeatsTheFullSearch) {
  std::mt19937_64 rng(223);
  const auto grid = flat_grid(14, 14);
  int compared = 0, optimal = 0;
  for (int trial = 0; trial < 12; ++trial) {
    std::uniform_int_distribution<int> c(2, 11);
    std::vector<Cell> blocked;
    for (int i = 0; i < 10; ++i) blocked.push_back(Cell(c(rng), c(rng), 0));
    const auto world = world_with_cells(grid, blocked);
    const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
    const Cell s(c(rng), c(rng), 0), g(c(rng), c(rng), 0);
    const Cell step(std::uniform_int_distribution<int>(-1, 1)(rng),
                    std::uniform_int_distribution<int>(-1, 1)(rng), 0);
    const auto init = moving_span(*world, s, step);
    bool ok = graph.free(g);
    for (const auto& p : init) ok = ok && graph.free(world->cell_of(p));
    if (!ok) continue;
    const auto q = make_query(graph, init, world->center(g),
                              search::auto_time_weight(*kTables, init, world->center(g), graph));
    const auto rbk = search::rbk_search(q);
    const auto full = baselines::full_span_search(q);
    if (!full.ok() || !rbk.ok()) continue;
    ++compared;
    expect_valid_result(q, rbk);
    EXPECT_NEAR(full.cost, search::trajectory_cost(*kTables, full.points, q.time_weight),
                1e-9 * full.cost);
    EXPECT_LE(full.cost, rbk.cost * (1.0 + 1e-9));
    optimal += std::abs(rbk.cost / full.cost - 1.0) <= 1e-9;
    baselines::FullSearchOptions dijkstra;
    dijkstra.use_heuristic = false;
    EXPECT_NEAR(baselines::full_span_search(q, dijkstra).cost, full.cost, 1e-9 * full.cost);
  }
  EXPECT_GE(compared, 5);
  EXPECT_GE(optimal, 1);
}

TEST(FullSearch, HoverAtGoalHasZeroControlCost) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const Vec3 p = world->center(Cell(6, 6, 0));
  const auto q = make_query(graph, search::static_span(p, kK), p, 0.0);
  const auto r = baselines::full_span_search(q);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.cost, 0.0, 1e-12);
}

TEST(FullSearch, RefusesOversizedStateSpace) {
  env::GridSpec grid;  // the default 60x60x20 grid
  const auto world = env::OccupancyWorld::build({}, grid, {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const Vec3 p = world->center(Cell(6, 6, 6));
  const auto r = baselines::full_span_search(make_query(graph, search::static_span(p, kK),
                                                        world->center(Cell(40, 40, 6)), 1.0));
  EXPECT_EQ(r.status, baselines::FullSearchStatus::kBudgetExceeded);
  EXPECT_GT(r.state_estimate, 5e7);
}

TEST(AStar, TrivialPaths) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const auto same = baselines::astar_shortest_path(graph, Cell(3, 3, 0), Cell(3, 3, 0));
  ASSERT_EQ(same.size(), 1u);
  const auto straight = baselines::astar_shortest_path(graph, Cell(2, 4, 0), Cell(7, 4, 0));
  EXPECT_NEAR(baselines::path_length(*world, straight), 5.0 / 6.0, 1e-12);
}

TEST(AStar, MatchesDijkstraOnRandomMaps) {
  std::mt19937_64 rng(227);
  env::GridSpec grid;
  grid.dims = Eigen::Vector3i(20, 20, 4);
  int found = 0;
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> cx(0, 19), cz(0, 3);
    std::vector<Cell> blocked;
    for (int i = 0; i < 300; ++i) blocked.push_back(Cell(cx(rng), cx(rng), cz(rng)));
    const auto world = world_with_cells(grid, blocked);
    const env::GridGraph graph(world, env::ClearanceLevel::kRaw, 26);
    const Cell s(cx(rng), cx(rng), cz(rng)), g(cx(rng), cx(rng), cz(rng));
    if (!graph.free(s) || !graph.free(g)) continue;
    const auto path = baselines::astar_shortest_path(graph, s, g);
    const double expected = oracle::dijkstra_length(graph, s, g);
    if (std::isinf(expected)) {
      EXPECT_TRUE(path.empty());
      continue;
    }
    ++found;
    ASSERT_FALSE(path.empty());
    EXPECT_EQ(path.front(), s);
    EXPECT_EQ(path.back(), g);
    EXPECT_NEAR(baselines::path_length(*world, path), expected, 1e-9);
  }
  EXPECT_GE(found, 15);
}

TEST(Parameterize, AlignedPathIsFeasible) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const auto init = moving_span(*world, Cell(6, 3, 0), Cell(1, 0, 0));
  // Cruise along +x, then stop at the goal.
  const auto path = baselines::astar_shortest_path(graph, Cell(6, 3, 0), Cell(12, 3, 0));
  auto spec = bspline::UniformBsplineSpec{};
  spec.bounds = {{1, Vec3::Constant(20.0)}, {2, Vec3::Constant(100.0)}};
  const auto loose = bspline::BasisTables::make(spec);
  const auto goal = search::static_span(world->center(Cell(12, 3, 0)), kK);
  const auto result = baselines::parameterize_path_as_bspline(path, *world, init, goal, *loose, 1.0);
  EXPECT_TRUE(result.feasible());
  EXPECT_NEAR(result.cost, search::trajectory_cost(*loose, result.points, 1.0), 1e-9 * result.cost);
  EXPECT_EQ(result.points.size(), init.size() + path.size() - 1 + kK - 1);
}

TEST(Parameterize, ReversalAgainstMotionIsInfeasible) {
  const auto world = world_with_cells(flat_grid(14, 14), {});
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const auto init = moving_span(*world, Cell(7, 7, 0), Cell(1, 0, 0));
  const auto path = baselines::astar_shortest_path(graph, Cell(7, 7, 0), Cell(2, 7, 0));
  const auto goal = search::static_span(world->center(Cell(2, 7, 0)), kK);
  const auto result = baselines::parameterize_path_as_bspline(path, *world, init, goal, *kTables, 1.0);
  EXPECT_FALSE(result.feasible());
  for (int j : result.infeasible_spans) {
    EXPECT_FALSE(bspline::check_span_feasible(*kTables, bspline::make_span(result.points, j, kK)).feasible);
  }
}
