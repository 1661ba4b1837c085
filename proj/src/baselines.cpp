#include "rbk/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace rbk::baselines {

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<int>& key) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : key) {
      h ^= static_cast<std::size_t>(static_cast<unsigned>(v));
      h *= 1099511628211ull;
    }
    return h;
  }
};

struct State {
  std::vector<int> ids;  // k-1 point ids, oldest first; seeds are negative
  int parent = -1;
  double g = 0.0;
};

struct Entry {
  double f;
  double g;
  int state;
  bool terminal;
};

struct EntryAfter {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    if (a.terminal != b.terminal) return !a.terminal;
    return a.state > b.state;
  }
};

}  // namespace

FullSearchResult full_span_search(const search::SearchQuery& query,
                                  const FullSearchOptions& options) {
  if (!query.tables || query.graph == nullptr) {
    throw std::invalid_argument("full_span_search: tables and graph are required");
  }
  const auto& tables = *query.tables;
  const auto& graph = *query.graph;
  const auto& world = graph.world();
  const int k = tables.k();
  const double dt = tables.dt();
  const double lambda = query.time_weight;
  if (static_cast<int>(query.init.size()) != k || static_cast<int>(query.goal.size()) != k) {
    throw std::invalid_argument("full_span_search: init and goal spans need exactly k points");
  }

  FullSearchResult result;
  result.state_estimate =
      world.grid().cell_count() * std::pow(double(graph.offsets().size()), k - 1);
  if (result.state_estimate > options.max_state_estimate) {
    result.status = FullSearchStatus::kBudgetExceeded;
    return result;
  }

  auto position = [&](int id) -> Vec3 {
    return id >= 0 ? world.center(world.cell_from_index(id)) : query.init[-id - 1];
  };
  auto h = [&](const Vec3& p) {
    return options.use_heuristic
               ? search::heuristic(p, query.goal.front(), lambda, query.v_max)
               : 0.0;
  };

  const env::Cell goal_cell = world.cell_of(query.goal.front());
  const env::Cell start_cell = world.cell_of(query.init.back());
  if (!world.in_bounds(goal_cell) || !world.in_bounds(start_cell)) return result;
  const int goal_index = world.linear_index(goal_cell);

  std::vector<State> states;
  std::unordered_map<std::vector<int>, int, KeyHash> index;
  std::vector<std::uint8_t> closed;
  std::priority_queue<Entry, std::vector<Entry>, EntryAfter> open;

  State root;
  for (int i = 1; i < k; ++i) root.ids.push_back(-(i + 1));
  root.g = bspline::span_control_cost(tables, bspline::make_span(query.init, 0, k)) +
           lambda * k * dt;
  states.push_back(root);
  closed.push_back(0);
  index.emplace(root.ids, 0);
  open.push({root.g + h(query.init.back()), root.g, 0, false});

  Eigen::MatrixX3d span(k, 3);
  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    if (top.terminal) {
      PointList chain;
      int cur = top.state;
      while (states[cur].parent >= 0) {
        chain.push_back(position(states[cur].ids.back()));
        cur = states[cur].parent;
      }
      PointList points(query.init.begin(), query.init.end());
      points.insert(points.end(), chain.rbegin(), chain.rend());
      points.insert(points.end(), query.goal.begin() + 1, query.goal.end());
      result.points = std::move(points);
      result.cost = top.g;
      result.states = states.size();
      result.status = FullSearchStatus::kSuccess;
      return result;
    }
    if (closed[top.state] || top.g != states[top.state].g) continue;
    closed[top.state] = 1;
    const std::vector<int> ids = states[top.state].ids;
    const double g = states[top.state].g;
    for (int i = 0; i < k - 1; ++i) span.row(i) = position(ids[i]).transpose();
    const Vec3 newest = position(ids.back());
    const env::Cell cell = world.cell_of(newest);

    if (world.linear_index(cell) == goal_index) {
      PointList tail(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) tail[i] = position(ids[i]);
      double appended = 0.0;
      if (search::goal_append_feasible(tables, tail, query.goal, &appended)) {
        open.push({g + appended + lambda * (k - 1) * dt, g + appended + lambda * (k - 1) * dt,
                   top.state, true});
      }
    }

    for (const auto& off : graph.offsets()) {
      const env::Cell next = cell + off;
      if (!graph.free(next)) continue;
      const int next_id = world.linear_index(next);
      const Vec3 pos = world.center(next);
      span.row(k - 1) = pos.transpose();
      if (!bspline::span_feasible(tables, span)) continue;
      const double g_next = g + bspline::span_control_cost(tables, span) + lambda * dt;
      std::vector<int> key(ids.begin() + 1, ids.end());
      key.push_back(next_id);
      auto it = index.find(key);
      if (it == index.end()) {
        if (states.size() >= options.max_states) {
          result.status = FullSearchStatus::kBudgetExceeded;
          result.states = states.size();
          return result;
        }
        State s;
        s.ids = key;
        s.parent = top.state;
        s.g = g_next;
        const int id = static_cast<int>(states.size());
        states.push_back(std::move(s));
        closed.push_back(0);
        index.emplace(std::move(key), id);
        open.push({g_next + h(pos), g_next, id, false});
      } else if (!closed[it->second] && g_next < states[it->second].g) {
        states[it->second].g = g_next;
        states[it->second].parent = top.state;
        open.push({g_next + h(pos), g_next, it->second, false});
      }
    }
  }
  result.states = states.size();
  result.status = FullSearchStatus::kNoPath;
  return result;
}

std::vector<env::Cell> astar_shortest_path(const env::GridGraph& graph, const env::Cell& start,
                                           const env::Cell& goal) {
  const auto& world = graph.world();
  if (!world.in_bounds(start) || !world.in_bounds(goal)) return {};
  const int n = world.grid().cell_count();
  const int s = world.linear_index(start);
  const int t = world.linear_index(goal);
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  struct Item {
    double f, g;
    int cell;
  };
  auto after = [](const Item& a, const Item& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    return a.cell > b.cell;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(after)> open(after);
  const Vec3 goal_pos = world.center(goal);
  g[s] = 0.0;
  open.push({(world.center(start) - goal_pos).norm(), 0.0, s});
  while (!open.empty()) {
    const Item top = open.top();
    open.pop();
    if (closed[top.cell] || top.g != g[top.cell]) continue;
    closed[top.cell] = 1;
    if (top.cell == t) break;
    const env::Cell cell = world.cell_from_index(top.cell);
    for (const auto& off : graph.offsets()) {
      const env::Cell next = cell + off;
      if (!graph.free(next)) continue;
      const int ni = world.linear_index(next);
      if (closed[ni]) continue;
      const double step = off.cast<double>().norm() * world.grid().resolution;
      const double gn = top.g + step;
      if (gn < g[ni]) {
        g[ni] = gn;
        parent[ni] = top.cell;
        open.push({gn + (world.center(next) - goal_pos).norm(), gn, ni});
      }
    }
  }
  if (!closed[t]) return {};
  std::vector<env::Cell> path;
  for (int cur = t; cur >= 0; cur = parent[cur]) path.push_back(world.cell_from_index(cur));
  std::reverse(path.begin(), path.end());
  return path;
}

double path_length(const env::OccupancyWorld& world, const std::vector<env::Cell>& path) {
  double length = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    length += (world.center(path[i]) - world.center(path[i - 1])).norm();
  }
  return length;
}

ParameterizedPath parameterize_path_as_bspline(const std::vector<env::Cell>& path,
                                               const env::OccupancyWorld& world,
                                               const PointList& init, const PointList& goal,
                                               const bspline::BasisTables& tables,
                                               double time_weight) {
  if (path.empty()) throw std::invalid_argument("parameterize_path_as_bspline: empty path");
  ParameterizedPath out;
  out.points = init;
  for (std::size_t i = 1; i < path.size(); ++i) out.points.push_back(world.center(path[i]));
  out.points.insert(out.points.end(), goal.begin() + 1, goal.end());
  const int k = tables.k();
  for (int j = 0; j + k <= static_cast<int>(out.points.size()); ++j) {
    if (!bspline::check_span_feasible(tables, bspline::make_span(out.points, j, k)).feasible) {
      out.infeasible_spans.push_back(j);
    }
  }
  out.cost = search::trajectory_cost(tables, out.points, time_weight);
  return out;
}

}  // namespace rbk::baselines
