#include "rbk/rbk_search.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace rbk::search {

const char* to_string(SearchStatus status) {
  switch (status) {
    case SearchStatus::kSuccess:
      return "success";
    case SearchStatus::kNoPath:
      return "no-path";
    case SearchStatus::kTimeout:
      return "timeout";
  }
  return "unknown";
}

bspline::Span retrieve_span(const SearchTree& tree, int node, int k) {
  bspline::Span span;
  span.points.resize(k, 3);
  int cur = node;
  for (int row = k - 1; row >= 0; --row) {
    if (cur < 0) throw std::logic_error("retrieve_span: predecessor chain shorter than k-1");
    span.points.row(row) = tree[cur].position.transpose();
    cur = tree[cur].parent;
  }
  return span;
}

double heuristic(const Vec3& point, const Vec3& goal, double time_weight, double v_max) {
  if (!(v_max > 0.0)) throw std::invalid_argument("heuristic: v_max must be > 0");
  return time_weight * (point - goal).norm() / v_max;
}

bool near_end(const env::OccupancyWorld& world, const bspline::Span& current,
              const bspline::Span& goal) {
  const Vec3 newest = current.points.row(current.size() - 1).transpose();
  const Vec3 first = goal.points.row(0).transpose();
  return world.cell_of(newest) == world.cell_of(first);
}

double trajectory_cost(const bspline::BasisTables& tables, const PointList& points,
                       double time_weight) {
  const int k = tables.k();
  double cost = 0.0;
  for (int j = 0; j + k <= static_cast<int>(points.size()); ++j) {
    cost += bspline::span_control_cost(tables, bspline::make_span(points, j, k));
  }
  return cost + time_weight * static_cast<double>(points.size()) * tables.dt();
}

bool goal_append_feasible(const bspline::BasisTables& tables, const PointList& tail,
                          const PointList& goal, double* appended_cost) {
  const int k = tables.k();
  PointList joined(tail.end() - (k - 1), tail.end());
  joined.insert(joined.end(), goal.begin() + 1, goal.end());
  double cost = 0.0;
  for (int j = 0; j + k <= static_cast<int>(joined.size()); ++j) {
    const bspline::Span span = bspline::make_span(joined, j, k);
    if (!bspline::span_feasible(tables, span.points)) return false;
    cost += bspline::span_control_cost(tables, span);
  }
  if (appended_cost != nullptr) *appended_cost = cost;
  return true;
}

PointList static_span(const Vec3& p, int k) { return PointList(static_cast<std::size_t>(k), p); }

double auto_time_weight(const bspline::BasisTables& tables, const PointList& init,
                        const Vec3& goal, const env::GridGraph& graph) {
  const int k = tables.k();
  const auto& world = graph.world();
  PointList probe = init;
  env::Cell cell = world.cell_of(init.back());
  const env::Cell goal_cell = world.cell_of(goal);
  for (int step = 0; step < 4 * k && cell != goal_cell; ++step) {
    env::Cell best = cell;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& off : graph.offsets()) {
      const env::Cell next = cell + off;
      const double d = (world.center(next) - goal).norm();
      if (d < best_d) {
        best_d = d;
        best = next;
      }
    }
    cell = best;
    probe.push_back(world.center(cell));
  }
  std::vector<double> all;
  for (int j = 1; j + k <= static_cast<int>(probe.size()); ++j) {
    all.push_back(bspline::span_control_cost(tables, bspline::make_span(probe, j, k)));
  }
  // Costs of straight runs are rounding noise, not control effort.
  const double largest = all.empty() ? 0.0 : *std::max_element(all.begin(), all.end());
  std::vector<double> costs;
  for (double c : all) {
    if (c > 1e-9 * largest && c > 1e-12) costs.push_back(c);
  }
  if (costs.empty()) {
    PointList impulse(static_cast<std::size_t>(k), Vec3::Zero());
    impulse.back() = Vec3(world.grid().resolution, 0.0, 0.0);
    costs.push_back(bspline::span_control_cost(tables, bspline::make_span(impulse, 0, k)));
  }
  std::sort(costs.begin(), costs.end());
  const double median = costs[costs.size() / 2];
  return median > 0.0 ? median / tables.dt() : 1.0;
}

namespace {

struct OpenEntry {
  double f;
  double g;
  int cell;
  int node;
};

// Lowest f, then lowest g, then lowest cell index.
struct EntryAfter {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    if (a.cell != b.cell) return a.cell > b.cell;
    return a.node > b.node;
  }
};

}  // namespace

SearchResult rbk_search(const SearchQuery& query) {
  if (!query.tables || query.graph == nullptr) {
    throw std::invalid_argument("rbk_search: tables and graph are required");
  }
  const auto& tables = *query.tables;
  const auto& graph = *query.graph;
  const auto& world = graph.world();
  const int k = tables.k();
  const double dt = tables.dt();
  const double lambda = query.time_weight;
  if (static_cast<int>(query.init.size()) != k || static_cast<int>(query.goal.size()) != k) {
    throw std::invalid_argument("rbk_search: init and goal spans need exactly k points");
  }
  if (lambda < 0.0) throw std::invalid_argument("rbk_search: time weight must be >= 0");
  const bspline::Span init_span = bspline::make_span(query.init, 0, k);
  if (!bspline::span_feasible(tables, init_span.points, 1e-9)) {
    throw std::invalid_argument("rbk_search: V_init violates the derivative bounds");
  }

  SearchResult result;
  const env::Cell start_cell = world.cell_of(query.init.back());
  const env::Cell goal_cell = world.cell_of(query.goal.front());
  if (!world.in_bounds(start_cell) || !world.in_bounds(goal_cell)) return result;
  const int start_index = world.linear_index(start_cell);
  const int goal_index = world.linear_index(goal_cell);
  if (start_index != goal_index && !graph.free(goal_cell)) return result;

  const std::size_t cells = static_cast<std::size_t>(world.grid().cell_count());
  const std::size_t budget = query.expansion_budget > 0 ? query.expansion_budget : 10 * cells;
  const Vec3 goal_point = query.goal.front();

  SearchTree tree;
  tree.reserve(4096);
  int parent = -1;
  for (int i = 0; i < k; ++i) {
    SearchNode seed;
    seed.position = query.init[i];
    seed.parent = parent;
    parent = tree.add(seed);
  }
  const int start_node = parent;
  tree[start_node].cell = start_index;
  tree[start_node].g = bspline::span_control_cost(tables, init_span) + lambda * k * dt;
  tree[start_node].f =
      tree[start_node].g + heuristic(query.init.back(), goal_point, lambda, query.v_max);

  std::vector<int> open_node(cells, -1);
  std::vector<std::uint8_t> closed(cells, 0);
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, EntryAfter> open;
  open.push({tree[start_node].f, tree[start_node].g, start_index, start_node});
  open_node[start_index] = start_node;

  Eigen::MatrixX3d nbr(k, 3);
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    if (open_node[top.cell] != top.node || tree[top.node].g != top.g) continue;
    open_node[top.cell] = -1;
    closed[top.cell] = 1;
    if (++result.expansions > budget) {
      result.status = SearchStatus::kTimeout;
      return result;
    }
    const bspline::Span span = retrieve_span(tree, top.node, k);

    if (top.cell == goal_index) {
      PointList tail(k - 1);
      for (int i = 1; i < k; ++i) tail[i - 1] = span.points.row(i).transpose();
      double appended = 0.0;
      if (goal_append_feasible(tables, tail, query.goal, &appended)) {
        PointList chain;
        for (int cur = top.node; cur >= 0; cur = tree[cur].parent) {
          chain.push_back(tree[cur].position);
        }
        std::reverse(chain.begin(), chain.end());
        chain.insert(chain.end(), query.goal.begin() + 1, query.goal.end());
        result.points = std::move(chain);
        result.cost = tree[top.node].g + appended + lambda * (k - 1) * dt;
        result.status = SearchStatus::kSuccess;
        return result;
      }
      // The arrival pattern cannot stop into the goal span; keep the goal
      // cell reachable through other predecessors.
      closed[top.cell] = 0;
    }

    nbr.topRows(k - 1) = span.points.bottomRows(k - 1);
    const env::Cell cell = world.cell_from_index(top.cell);
    for (const auto& off : graph.offsets()) {
      const env::Cell next = cell + off;
      if (!graph.free(next)) continue;
      const int next_index = world.linear_index(next);
      if (closed[next_index]) continue;
      const Vec3 pos = world.center(next);
      nbr.row(k - 1) = pos.transpose();
      if (!bspline::span_feasible(tables, nbr)) continue;
      const double step_cost = bspline::span_control_cost(tables, nbr) + lambda * dt;
      const double g = tree[top.node].g + step_cost;
      const int existing = open_node[next_index];
      if (existing >= 0) {
        if (g < tree[existing].g) {
          tree[existing].parent = top.node;
          tree[existing].g = g;
          tree[existing].f = g + heuristic(pos, goal_point, lambda, query.v_max);
          open.push({tree[existing].f, g, next_index, existing});
        }
      } else {
        SearchNode node;
        node.position = pos;
        node.cell = next_index;
        node.parent = top.node;
        node.g = g;
        node.f = g + heuristic(pos, goal_point, lambda, query.v_max);
        const int id = tree.add(node);
        open_node[next_index] = id;
        open.push({node.f, g, next_index, id});
      }
    }
  }
  result.status = SearchStatus::kNoPath;
  return result;
}

}  // namespace rbk::search
