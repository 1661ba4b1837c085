#include "rbk/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rbk/geometry.hpp"

namespace rbk::bspline {

namespace {

// Polynomial in u by ascending power.
using Poly = std::vector<double>;

Poly poly_mul_linear(const Poly& p, double c0, double c1) {
  Poly out(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] += c0 * p[i];
    out[i + 1] += c1 * p[i];
  }
  return out;
}

void poly_add(Poly& acc, const Poly& p) {
  if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i];
}

double binomial(int n, int r) {
  if (r < 0 || r > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

double falling_factorial(int n, int r) {
  double out = 1.0;
  for (int i = 0; i < r; ++i) out *= (n - i);
  return out;
}

}  // namespace

double UniformBsplineSpec::weight(int order) const {
  if (order < 1 || order > static_cast<int>(weights.size())) return 0.0;
  return weights[order - 1];
}

void UniformBsplineSpec::validate() const {
  if (k < 2) throw std::invalid_argument("span size k must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("knot step dt must be > 0");
  bool any_positive = false;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("derivative weights must be >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (static_cast<int>(weights.size()) > std::max(k - 2, 0)) {
    throw std::invalid_argument("weights given for derivative orders above k-2");
  }
  if (k > 2 && !any_positive) throw std::invalid_argument("at least one weight must be positive");
  for (const auto& [order, bound] : bounds) {
    if (order < 1 || order > k - 1) {
      throw std::invalid_argument("bound order " + std::to_string(order) + " outside 1..k-1");
    }
    if ((bound.array() <= 0.0).any()) throw std::invalid_argument("derivative bounds must be > 0");
  }
}

Span make_span(const PointList& points, int first, int k) {
  if (first < 0 || first + k > static_cast<int>(points.size())) {
    throw std::out_of_range("span outside control point range");
  }
  Span span;
  span.points.resize(k, 3);
  for (int i = 0; i < k; ++i) span.points.row(i) = points[first + i].transpose();
  span.start_knot_index = first;
  return span;
}

Eigen::MatrixXd basis_matrix(int k) {
  if (k < 2) throw std::invalid_argument("basis_matrix: k must be >= 2");
  // Knots t_i = i. The span [k-1, k) is governed by basis functions
  // N_0..N_{k-1}; track each restricted to that span as a polynomial in
  // u = t - (k-1) through the De Boor-Cox recursion.
  const int num_knots = 2 * k;
  std::vector<Poly> level(num_knots - 1);
  for (int i = 0; i < num_knots - 1; ++i) level[i] = (i == k - 1) ? Poly{1.0} : Poly{0.0};
  for (int order = 2; order <= k; ++order) {
    std::vector<Poly> next(num_knots - order);
    const double denom = order - 1;
    for (int i = 0; i < num_knots - order; ++i) {
      // (t - i) / denom * N_{i,order-1} + (i + order - t) / denom * N_{i+1,order-1}
      const double shift = (k - 1) - i;
      Poly acc = poly_mul_linear(level[i], shift / denom, 1.0 / denom);
      poly_add(acc, poly_mul_linear(level[i + 1], (order - shift) / denom, -1.0 / denom));
      next[i] = std::move(acc);
    }
    level = std::move(next);
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    for (std::size_t p = 0; p < level[j].size() && p < static_cast<std::size_t>(k); ++p) {
      m(static_cast<int>(p), j) = level[j][p];
    }
  }
  return m;
}

Eigen::MatrixXd derivative_map(int k, int order) {
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(k, k);
  for (int i = 1; i < k; ++i) c1(i, i - 1) = i;
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(k, k);
  for (int i = 0; i < order; ++i) out = c1 * out;
  return out;
}

BasisTables::BasisTables(const UniformBsplineSpec& spec) : spec_(spec) {
  spec_.validate();
  const int k = spec_.k;
  const int n = k - 1;
  basis_ = basis_matrix(k);

  // Monomial -> Bernstein (degree n) coefficients.
  Eigen::MatrixXd to_bernstein = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i <= j; ++i) to_bernstein(j, i) = binomial(j, i) / binomial(n, i);
  }

  derivative_maps_.resize(k);
  cost_hessians_.resize(k);
  feasibility_.resize(k);
  span_hessian_ = Eigen::MatrixXd::Zero(k, k);
  for (int l = 0; l < k; ++l) {
    derivative_maps_[l] = rbk::bspline::derivative_map(k, l);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
    for (int i = l; i < k; ++i) {
      for (int j = l; j < k; ++j) {
        q(i, j) = falling_factorial(i, l) * falling_factorial(j, l) / (i + j - 2 * l + 1);
      }
    }
    q /= std::pow(spec_.dt, 2 * l - 1);
    cost_hessians_[l] = q;
    feasibility_[l] =
        to_bernstein * derivative_maps_[l].transpose() * basis_ / std::pow(spec_.dt, l);
    if (l >= 1 && spec_.weight(l) > 0.0) {
      span_hessian_ += spec_.weight(l) * basis_.transpose() * q * basis_;
    }
  }
  span_hessian_ = 0.5 * (span_hessian_ + span_hessian_.transpose());
}

Eigen::RowVectorXd BasisTables::evaluation_row(double u, int order) const {
  const int k = spec_.k;
  Eigen::RowVectorXd db = Eigen::RowVectorXd::Zero(k);
  for (int p = order; p < k; ++p) db(p) = falling_factorial(p, order) * std::pow(u, p - order);
  return db * basis_ / std::pow(spec_.dt, order);
}

Vec3 evaluate(const BasisTables& tables, const Span& span, double u, int order) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("evaluate: u outside [0, 1]");
  if (order < 0 || order > tables.k() - 1) {
    throw std::invalid_argument("evaluate: derivative order outside 0..k-1");
  }
  if (span.size() != tables.k()) throw std::invalid_argument("evaluate: span size != k");
  return (tables.evaluation_row(u, order) * span.points).transpose();
}

double span_control_cost(const BasisTables& tables, const Eigen::Ref<const Eigen::MatrixX3d>& points) {
  // The cost ignores translation; centering keeps a hover span at exactly 0.
  const Eigen::MatrixX3d rel = points.rowwise() - points.row(0);
  return (rel.transpose() * tables.span_hessian() * rel).trace();
}

double span_control_cost(const BasisTables& tables, const Span& span) {
  return span_control_cost(tables, span.points);
}

FeasibilityReport check_span_feasible(const BasisTables& tables, const Span& span) {
  FeasibilityReport report;
  for (const auto& [order, bound] : tables.spec().bounds) {
    const Eigen::MatrixX3d combos = tables.feasibility(order) * span.points;
    double margin = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
      margin = std::min(margin, bound(axis) - combos.col(axis).cwiseAbs().maxCoeff());
    }
    report.margins[order] = margin;
    if (margin < 0.0) report.feasible = false;
  }
  return report;
}

bool span_feasible(const BasisTables& tables, const Eigen::Ref<const Eigen::MatrixX3d>& points,
                   double tolerance) {
  const int k = tables.k();
  for (const auto& [order, bound] : tables.spec().bounds) {
    const auto& s = tables.feasibility(order);
    for (int axis = 0; axis < 3; ++axis) {
      const double limit = bound(axis) + tolerance;
      for (int row = 0; row < k; ++row) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += s(row, j) * points(j, axis);
        if (std::abs(acc) > limit) return false;
      }
    }
  }
  return true;
}

double max_polyline_deviation(const BasisTables& tables, const PointList& points,
                              int samples_per_span) {
  const int k = tables.k();
  const int spans = static_cast<int>(points.size()) - k + 1;
  std::vector<Eigen::RowVectorXd> rows;
  rows.reserve(samples_per_span + 1);
  for (int s = 0; s <= samples_per_span; ++s) {
    rows.push_back(tables.evaluation_row(static_cast<double>(s) / samples_per_span, 0));
  }
  double worst = 0.0;
  for (int j = 0; j < spans; ++j) {
    const Span span = make_span(points, j, k);
    for (const auto& row : rows) {
      const Vec3 c = (row * span.points).transpose();
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i + 1 < k; ++i) {
        best = std::min(best, geometry::point_segment_distance(c, points[j + i], points[j + i + 1]));
      }
      if (k == 1) best = (c - points[j]).norm();
      worst = std::max(worst, best);
    }
  }
  return worst;
}

RefineResult refine_toward_polyline(const BasisTables& tables, PointList points, double tolerance,
                                    std::size_t max_points) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("refine: tolerance must be > 0");
  RefineResult result;
  result.max_deviation = max_polyline_deviation(tables, points);
  while (result.max_deviation > tolerance) {
    if (points.size() * 2 > max_points) {
      result.converged = false;
      break;
    }
    PointList refined;
    refined.reserve(points.size() * 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
      refined.push_back(points[i]);
      if (i + 1 < points.size()) refined.push_back(0.5 * (points[i] + points[i + 1]));
    }
    points = std::move(refined);
    ++result.passes;
    result.max_deviation = max_polyline_deviation(tables, points);
  }
  result.points = std::move(points);
  return result;
}

Trajectory::Trajectory(std::shared_ptr<const BasisTables> tables, PointList points, double t0)
    : tables_(std::move(tables)), points_(std::move(points)), t0_(t0) {
  if (static_cast<int>(points_.size()) < tables_->k()) {
    throw std::invalid_argument("trajectory needs at least k control points");
  }
}

int Trajectory::span_count() const { return static_cast<int>(points_.size()) - tables_->k() + 1; }

double Trajectory::end_time() const { return t0_ + span_count() * tables_->dt(); }

Vec3 Trajectory::evaluate_span(int span_index, double u, int order) const {
  const int k = tables_->k();
  const Eigen::RowVectorXd row = tables_->evaluation_row(u, order);
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < k; ++i) out += row(i) * points_[span_index + i];
  return out;
}

Vec3 Trajectory::evaluate(double t, int order) const {
  const double s = (t - t0_) / tables_->dt();
  int j = static_cast<int>(std::floor(s));
  j = std::clamp(j, 0, span_count() - 1);
  const double u = std::clamp(s - j, 0.0, 1.0);
  return evaluate_span(j, u, order);
}

}  // namespace rbk::bspline
