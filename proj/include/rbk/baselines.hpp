#pragma once

#include <cstddef>
#include <vector>

#include "rbk/rbk_search.hpp"

namespace rbk::baselines {

using bspline::PointList;
using bspline::Vec3;

struct FullSearchOptions {
  bool use_heuristic = true;  // false: plain Dijkstra, for audits
  // Refuse up front when cells * M^(k-1) exceeds this.
  double max_state_estimate = 5e7;
  // Abort once this many distinct span states were created.
  std::size_t max_states = 20'000'000;
};

enum class FullSearchStatus { kSuccess, kNoPath, kBudgetExceeded };

struct FullSearchResult {
  FullSearchStatus status = FullSearchStatus::kNoPath;
  PointList points;
  double cost = 0.0;
  std::size_t states = 0;
  double state_estimate = 0.0;
  bool ok() const { return status == FullSearchStatus::kSuccess; }
};

// Exact search over (k-1)-point span states for the same objective and
// termination rule as rbk_search.
FullSearchResult full_span_search(const search::SearchQuery& query,
                                  const FullSearchOptions& options = {});

// Shortest M-connect cell path with Euclidean edge lengths. Empty on failure.
std::vector<env::Cell> astar_shortest_path(const env::GridGraph& graph, const env::Cell& start,
                                           const env::Cell& goal);

double path_length(const env::OccupancyWorld& world, const std::vector<env::Cell>& path);

struct ParameterizedPath {
  PointList points;
  double cost = 0.0;
  std::vector<int> infeasible_spans;
  bool feasible() const { return infeasible_spans.empty(); }
};

// V_init ++ path cell centers (minus the start cell) ++ goal tail, used
// verbatim as control points.
ParameterizedPath parameterize_path_as_bspline(const std::vector<env::Cell>& path,
                                               const env::OccupancyWorld& world,
                                               const PointList& init, const PointList& goal,
                                               const bspline::BasisTables& tables,
                                               double time_weight);

}  // namespace rbk::baselines
