#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <vector>

namespace rbk::bspline {

using Vec3 = Eigen::Vector3d;
using PointList = std::vector<Vec3>;

// Uniform B-spline of degree k-1 with knot step dt.
struct UniformBsplineSpec {
  int k = 6;
  double dt = 0.2;
  // weights[l - 1] weighs the squared l-th derivative, l in 1..k-2.
  std::vector<double> weights = {0.0, 0.0, 0.0, 1.0};
  // Per-axis derivative bound keyed by derivative order. Only the orders
  // present here are checked.
  std::map<int, Vec3> bounds = {{1, Vec3::Constant(2.0)}, {2, Vec3::Constant(3.0)}};

  double weight(int order) const;
  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

// A stack of k consecutive control points (rows), oldest first.
struct Span {
  Eigen::MatrixX3d points;
  int start_knot_index = 0;

  int size() const { return static_cast<int>(points.rows()); }
};

Span make_span(const PointList& points, int first, int k);

// k x k matrix M with c(u) = b(u)^T M V, b = [1 u ... u^{k-1}].
// Fitted against the De Boor-Cox recursion on the uniform knot vector.
Eigen::MatrixXd basis_matrix(int k);

// d^l b / du^l = C_l b.
Eigen::MatrixXd derivative_map(int k, int order);

// Precomputed per-(spec) matrices. Immutable after construction.
class BasisTables {
 public:
  explicit BasisTables(const UniformBsplineSpec& spec);

  static std::shared_ptr<const BasisTables> make(const UniformBsplineSpec& spec) {
    return std::make_shared<const BasisTables>(spec);
  }

  const UniformBsplineSpec& spec() const { return spec_; }
  int k() const { return spec_.k; }
  double dt() const { return spec_.dt; }

  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::MatrixXd& derivative_map(int order) const { return derivative_maps_.at(order); }
  // Integral of (d^l b)(d^l b)^T over [0,1], divided by dt^(2l-1).
  const Eigen::MatrixXd& cost_hessian(int order) const { return cost_hessians_.at(order); }
  // Maps the stacked span coordinates to the Bernstein coefficients of the
  // l-th time derivative on that span; includes the 1/dt^l factor.
  const Eigen::MatrixXd& feasibility(int order) const { return feasibility_.at(order); }
  // sum_l w_l M^T Q_l M: span cost is sum over axes of v^T H v.
  const Eigen::MatrixXd& span_hessian() const { return span_hessian_; }

  // Row i holds d^l b^T / du^l M / dt^l evaluated at u; used for sampling.
  Eigen::RowVectorXd evaluation_row(double u, int order) const;

 private:
  UniformBsplineSpec spec_;
  Eigen::MatrixXd basis_;
  std::vector<Eigen::MatrixXd> derivative_maps_;
  std::vector<Eigen::MatrixXd> cost_hessians_;
  std::vector<Eigen::MatrixXd> feasibility_;
  Eigen::MatrixXd span_hessian_;
};

// l-th time derivative of the span curve at normalized parameter u in [0,1].
Vec3 evaluate(const BasisTables& tables, const Span& span, double u, int order);

// Weighted integral of squared derivatives over one span, summed over axes.
double span_control_cost(const BasisTables& tables, const Span& span);
// Same, for the rows of `points` taken as a span.
double span_control_cost(const BasisTables& tables, const Eigen::Ref<const Eigen::MatrixX3d>& points);

struct FeasibilityReport {
  bool feasible = true;
  // margins[order] = min over axes and rows of (bound - |S v|).
  std::map<int, double> margins;
};

FeasibilityReport check_span_feasible(const BasisTables& tables, const Span& span);

// Hot-path variant for search loops: rows of `points` are the span.
bool span_feasible(const BasisTables& tables, const Eigen::Ref<const Eigen::MatrixX3d>& points,
                   double tolerance = 1e-12);

// Max distance from the curve to the control polyline of its own span,
// densely sampled.
double max_polyline_deviation(const BasisTables& tables, const PointList& points,
                              int samples_per_span = 40);

struct RefineResult {
  PointList points;
  double max_deviation = 0.0;
  int passes = 0;
  bool converged = true;
};

// Inserts segment midpoints until the curve stays within `tolerance` of the
// control polyline. Inserted points lie on the polyline, so the polyline
// itself never changes.
RefineResult refine_toward_polyline(const BasisTables& tables, PointList points, double tolerance,
                                    std::size_t max_points = 20000);

// A full control-point sequence with a time origin. Span j covers
// [t0 + j dt, t0 + (j + 1) dt].
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const BasisTables> tables, PointList points, double t0 = 0.0);

  const BasisTables& tables() const { return *tables_; }
  const PointList& points() const { return points_; }
  double start_time() const { return t0_; }
  double end_time() const;
  int span_count() const;

  // Clamped to [start_time, end_time].
  Vec3 evaluate(double t, int order = 0) const;
  Vec3 evaluate_span(int span_index, double u, int order) const;

 private:
  std::shared_ptr<const BasisTables> tables_;
  PointList points_;
  double t0_ = 0.0;
};

}  // namespace rbk::bspline
