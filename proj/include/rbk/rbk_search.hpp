#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "rbk/bspline.hpp"
#include "rbk/env.hpp"

namespace rbk::search {

using bspline::PointList;
using bspline::Vec3;

struct SearchQuery {
  PointList init;  // V_init, k points, oldest first
  PointList goal;  // V_goal, k points
  double time_weight = 1.0;  // lambda
  std::shared_ptr<const bspline::BasisTables> tables;
  const env::GridGraph* graph = nullptr;  // at the search clearance level
  double v_max = 3.5;  // Euclidean speed used by the heuristic
  // 0 selects 10x the cell count.
  std::size_t expansion_budget = 0;
};

enum class SearchStatus { kSuccess, kNoPath, kTimeout };

const char* to_string(SearchStatus status);

struct SearchResult {
  SearchStatus status = SearchStatus::kNoPath;
  PointList points;  // init ++ interior ++ goal tail
  double cost = 0.0;
  std::size_t expansions = 0;

  bool ok() const { return status == SearchStatus::kSuccess; }
};

// Search tree: nodes are control points linked to their predecessor.
struct SearchNode {
  Vec3 position;
  int cell = -1;    // linear grid index; -1 for seed points
  int parent = -1;  // node index
  double g = 0.0;
  double f = 0.0;
};

class SearchTree {
 public:
  int add(const SearchNode& node) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  SearchNode& operator[](int i) { return nodes_[i]; }
  const SearchNode& operator[](int i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  std::vector<SearchNode> nodes_;
};

// Stacks the k-1 predecessors of `node` with the node itself, oldest first.
// Throws std::logic_error when the chain is shorter than k-1.
bspline::Span retrieve_span(const SearchTree& tree, int node, int k);

double heuristic(const Vec3& point, const Vec3& goal, double time_weight, double v_max);

// Cell-exact: the newest point of the current span sits in the cell of the
// goal span's first point.
bool near_end(const env::OccupancyWorld& world, const bspline::Span& current,
              const bspline::Span& goal);

// Sum of span control costs plus time_weight * (#points) * dt.
double trajectory_cost(const bspline::BasisTables& tables, const PointList& points,
                       double time_weight);

// True when the last k-1 points of `tail` followed by goal[1..k-1] form
// feasible spans; `appended_cost` receives their control cost.
bool goal_append_feasible(const bspline::BasisTables& tables, const PointList& tail,
                          const PointList& goal, double* appended_cost);

// Picks lambda so that lambda * dt matches the median nonzero single-span
// control cost along a rasterized straight line from V_init to the goal.
double auto_time_weight(const bspline::BasisTables& tables, const PointList& init,
                        const Vec3& goal, const env::GridGraph& graph);

PointList static_span(const Vec3& p, int k);

SearchResult rbk_search(const SearchQuery& query);

}  // namespace rbk::search
