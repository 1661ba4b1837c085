#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rbk/bspline.hpp"
#include "rbk/env.hpp"

namespace rbk::elastic {

using bspline::PointList;
using bspline::Vec3;

struct TubeParams {
  double infl_min = 0.0;
  double infl_max = 1.0;
  double threshold = 1.0 / 12.0;  // d_thres: half the map resolution
  double tolerance = 1.0 / 6.0;   // binary search stops below this interval
  // Radii are measured to the obstacles inflated by this clearance.
  double clearance = 0.25;
  // Stand-in for "no obstacle in sight".
  double radius_cap = 4.0;

  static TubeParams for_world(const env::OccupancyWorld& world, double radius_cap);
};

struct ElasticTube {
  PointList sources;                // p_i
  std::vector<double> source_radii;  // r_i
  PointList centers;                // q_i
  std::vector<double> radii;        // r'_i
  std::size_t size() const { return centers.size(); }
};

ElasticTube elastic_tube(const PointList& placement, const env::OccupancyWorld& world,
                         const TubeParams& params);

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

// Control points [first, last] are the placement x_0..x_m; everything else
// in `points` is fixed context that forms hybrid spans with it.
struct PlacementProblem {
  const bspline::BasisTables* tables = nullptr;
  PointList points;
  int first = 0;
  int last = 0;
  // One ball per interior index first+1..last-1.
  std::vector<Ball> balls;
  std::optional<std::pair<Vec3, Vec3>> box;  // optional axis-aligned bounds
};

PlacementProblem make_placement_problem(const bspline::BasisTables& tables, PointList points,
                                        int first, int last, const ElasticTube& tube);

// Sum of the span costs of every span that touches x_0..x_m.
double placement_objective(const PlacementProblem& problem, const PointList& points);

// Largest violation over pinning, balls, box and derivative bounds; <= 0
// means feasible.
double max_constraint_violation(const PlacementProblem& problem, const PointList& points);

struct QcqpOptions {
  double feasibility_tolerance = 1e-9;  // accepted slack on the initial point
  double relaxation = 1e-8;             // barrier works on constraints loosened by this
  double gap_tolerance = 1e-6;          // duality gap target, relative to the initial objective
  double centering_tolerance = 1e-8;    // Newton decrement that ends a centering pass
  double barrier_growth = 20.0;
  int max_newton_steps = 400;
};

struct QcqpResult {
  PointList points;
  double initial_objective = 0.0;
  double objective = 0.0;
  int newton_steps = 0;
  bool converged = false;
  bool rejected = false;  // initial point violates the constraints
  std::string diagnostic;
};

QcqpResult solve_placement_qcqp(const PlacementProblem& problem, const QcqpOptions& options = {});

struct InflationCheck {
  bool ok = false;
  double max_step = 0.0;
  double connectivity_margin = 0.0;  // 2 (c_rbk - c_elas) - d_max
  double polyline_margin = 0.0;      // c_elas - robot_radius - (sqrt2 - 1)/2 d_max
};

InflationCheck check_two_level_inflation(double resolution, int connectivity, double c_rbk,
                                         double c_elas, double robot_radius);

struct SafetyParams {
  double robot_radius = 0.15;
  int samples_per_span = 20;  // dt / 20 sampling
  int max_rounds = 16;
};

struct SafetyResult {
  PointList points;
  bool safe = false;
  bool polyline_collision = false;
  int inserted = 0;
  double min_clearance = 0.0;
  std::string diagnostic;
};

// Minimum sampled clearance of the spans [first_span, last_span].
double sampled_clearance(const bspline::BasisTables& tables, const PointList& points,
                         const env::OccupancyWorld& world, int first_span, int last_span,
                         int samples_per_span);

// Checks the curve from span index `first_span` on; where it comes within
// robot_radius of an obstacle, refines the control polygon toward its
// polyline. Points before `mutable_begin` are never moved and nothing is
// inserted before them.
SafetyResult enforce_safety(const bspline::BasisTables& tables, PointList points,
                            int mutable_begin, int first_span, const env::OccupancyWorld& world,
                            const SafetyParams& params);

}  // namespace rbk::elastic
