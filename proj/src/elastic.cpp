#include "rbk/elastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbk::elastic {

TubeParams TubeParams::for_world(const env::OccupancyWorld& world, double radius_cap) {
  TubeParams params;
  params.threshold = 0.5 * world.grid().resolution;
  params.tolerance = world.grid().resolution;
  params.clearance = world.clearances().elas;
  params.radius_cap = radius_cap;
  return params;
}

ElasticTube elastic_tube(const PointList& placement, const env::OccupancyWorld& world,
                         const TubeParams& params) {
  ElasticTube tube;
  const int n = static_cast<int>(placement.size());
  auto radius_at = [&](const Vec3& p, env::NearestObstacle* nearest) {
    const env::NearestObstacle nn = world.nn_search(p);
    if (nearest != nullptr) *nearest = nn;
    if (!nn.found()) return params.radius_cap;
    return std::min(nn.distance - params.clearance, params.radius_cap);
  };
  for (int i = 0; i < n; ++i) {
    const Vec3& p = placement[i];
    env::NearestObstacle nn;
    const double r = radius_at(p, &nn);

    // Push direction: away from the nearest obstacle, else away from the
    // centroid of the adjacent placement points.
    Vec3 dir = Vec3::Zero();
    if (nn.found() && (p - nn.point).norm() > 1e-12) {
      dir = (p - nn.point).normalized();
    } else if (n > 1) {
      Vec3 centroid = Vec3::Zero();
      int count = 0;
      if (i > 0) centroid += placement[i - 1], ++count;
      if (i + 1 < n) centroid += placement[i + 1], ++count;
      centroid /= count;
      if ((p - centroid).norm() > 1e-12) dir = (p - centroid).normalized();
    }

    Vec3 center = p;
    double radius = std::max(r, 0.0);
    if (!nn.found()) {
      if (dir.norm() > 0.0) center = p + params.infl_max * dir;
      radius = params.radius_cap;
    } else if (r > 0.0 && dir.norm() > 0.0) {
      double lo = params.infl_min;
      double hi = params.infl_max;
      while (hi - lo > params.tolerance) {
        const double d = 0.5 * (lo + hi);
        const Vec3 q = p + d * dir;
        const double rq = radius_at(q, nullptr);
        // The pushed bubble must still contain the original one and p itself.
        if (std::abs(rq - d - r) > params.threshold || rq <= d) {
          hi = d;
        } else {
          lo = d;
          center = q;
          radius = rq;
        }
      }
    }
    tube.sources.push_back(p);
    tube.source_radii.push_back(r);
    tube.centers.push_back(center);
    tube.radii.push_back(radius);
  }
  return tube;
}

InflationCheck check_two_level_inflation(double resolution, int connectivity, double c_rbk,
                                         double c_elas, double robot_radius) {
  InflationCheck check;
  check.max_step = env::max_step_for(resolution, connectivity);
  check.connectivity_margin = 2.0 * (c_rbk - c_elas) - check.max_step;
  check.polyline_margin =
      (c_elas - robot_radius) - 0.5 * (std::sqrt(2.0) - 1.0) * check.max_step;
  check.ok = check.connectivity_margin > 0.0 && check.polyline_margin > 0.0;
  return check;
}

double sampled_clearance(const bspline::BasisTables& tables, const PointList& points,
                         const env::OccupancyWorld& world, int first_span, int last_span,
                         int samples_per_span) {
  const int k = tables.k();
  std::vector<Eigen::RowVectorXd> rows;
  for (int s = 0; s <= samples_per_span; ++s) {
    rows.push_back(tables.evaluation_row(static_cast<double>(s) / samples_per_span, 0));
  }
  double best = std::numeric_limits<double>::infinity();
  for (int j = std::max(first_span, 0); j <= last_span && j + k <= int(points.size()); ++j) {
    for (const auto& row : rows) {
      Vec3 c = Vec3::Zero();
      for (int i = 0; i < k; ++i) c += row(i) * points[j + i];
      best = std::min(best, world.clearance(c));
    }
  }
  return best;
}

namespace {

double polyline_clearance(const PointList& points, int begin, int end,
                          const env::OccupancyWorld& world) {
  const double step = world.grid().resolution / 8.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = begin; i < end; ++i) {
    const Vec3& a = points[i];
    const Vec3& b = points[i + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int s = 0; s <= pieces; ++s) {
      best = std::min(best, world.clearance(a + (b - a) * (double(s) / pieces)));
    }
  }
  return best;
}

}  // namespace

SafetyResult enforce_safety(const bspline::BasisTables& tables, PointList points,
                            int mutable_begin, int first_span, const env::OccupancyWorld& world,
                            const SafetyParams& params) {
  const int k = tables.k();
  SafetyResult result;
  for (int round = 0;; ++round) {
    const int spans = static_cast<int>(points.size()) - k + 1;
    int offending = -1;
    double min_clear = std::numeric_limits<double>::infinity();
    for (int j = std::max(first_span, 0); j < spans; ++j) {
      const double c = sampled_clearance(tables, points, world, j, j, params.samples_per_span);
      min_clear = std::min(min_clear, c);
      if (c <= params.robot_radius && offending < 0) offending = j;
    }
    result.min_clearance = min_clear;
    if (offending < 0) {
      result.safe = true;
      break;
    }
    std::ostringstream why;
    if (offending + k - 1 < mutable_begin) {
      why << "span " << offending << " collides and all of its control points are fixed";
      result.diagnostic = why.str();
      break;
    }
    const int seg_begin = offending;
    const int seg_end = offending + k - 1;
    if (polyline_clearance(points, seg_begin, seg_end, world) <= params.robot_radius) {
      result.polyline_collision = true;
      why << "control polyline of span " << offending << " is within the robot radius";
      result.diagnostic = why.str();
      break;
    }
    if (round >= params.max_rounds) {
      why << "refinement did not clear span " << offending << " within " << params.max_rounds
          << " rounds";
      result.diagnostic = why.str();
      break;
    }
    // Subdivide the refinable segments of the offending span: midpoints lie
    // on the polyline, so the polyline (and its clearance) is unchanged.
    const int lo = std::max(seg_begin, mutable_begin - 1);
    PointList refined(points.begin(), points.begin() + lo + 1);
    for (int i = lo; i < seg_end; ++i) {
      refined.push_back(0.5 * (points[i] + points[i + 1]));
      refined.push_back(points[i + 1]);
      ++result.inserted;
    }
    refined.insert(refined.end(), points.begin() + seg_end + 1, points.end());
    points = std::move(refined);
  }
  result.points = std::move(points);
  return result;
}

}  // namespace rbk::elastic
