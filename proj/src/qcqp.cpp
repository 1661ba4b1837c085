#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rbk/elastic.hpp"

namespace rbk::elastic {

namespace {

constexpr double kPinnedRadius = 1e-6;

// Spans whose control points include any index in [first, last].
std::pair<int, int> touched_spans(int n, int k, int first, int last) {
  return {std::max(0, first - k + 1), std::min(last, n - k)};
}

// a . z + b <= 0, with a stored sparsely.
struct LinearRow {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;
};

struct BallRow {
  int var = 0;  // first of three consecutive variables
  Vec3 center;
  double radius = 0.0;
};

// Variables: interior points first+1..last-1 that are not pinned,
// laid out as z[3 v + axis].
class Layout {
 public:
  Layout(const PlacementProblem& p) : first_(p.first) {
    const int m = p.last - p.first;
    var_of_.assign(std::max(m + 1, 0), -1);
    for (int i = 1; i < m; ++i) {
      const Ball& ball = p.balls[i - 1];
      if (ball.radius < kPinnedRadius) continue;
      var_of_[i] = count_++;
      index_of_.push_back(p.first + i);
    }
  }
  int count() const { return count_; }
  int var_of_point(int point) const {
    const int local = point - first_;
    if (local < 0 || local >= static_cast<int>(var_of_.size())) return -1;
    return var_of_[local];
  }
  int point_of_var(int v) const { return index_of_[v]; }

  Eigen::VectorXd pack(const PointList& points) const {
    Eigen::VectorXd z(3 * count_);
    for (int v = 0; v < count_; ++v) z.segment<3>(3 * v) = points[index_of_[v]];
    return z;
  }
  void unpack(const Eigen::VectorXd& z, PointList& points) const {
    for (int v = 0; v < count_; ++v) points[index_of_[v]] = z.segment<3>(3 * v);
  }

 private:
  int first_;
  int count_ = 0;
  std::vector<int> var_of_;
  std::vector<int> index_of_;
};

struct Program {
  Eigen::MatrixXd hessian;  // objective = 0.5 z^T P z + q^T z + r
  Eigen::VectorXd linear;
  double constant = 0.0;
  std::vector<LinearRow> rows;
  std::vector<BallRow> balls;
};

Program assemble(const PlacementProblem& problem, const Layout& layout, double relaxation) {
  const auto& tables = *problem.tables;
  const int k = tables.k();
  const int n = static_cast<int>(problem.points.size());
  const int nz = 3 * layout.count();
  const auto& h = tables.span_hessian();
  Program prog;
  prog.hessian = Eigen::MatrixXd::Zero(nz, nz);
  prog.linear = Eigen::VectorXd::Zero(nz);

  const auto [j0, j1] = touched_spans(n, k, problem.first, problem.last);
  for (int j = j0; j <= j1; ++j) {
    std::vector<int> vars(k);
    bool any = false;
    for (int i = 0; i < k; ++i) {
      vars[i] = layout.var_of_point(j + i);
      any = any || vars[i] >= 0;
    }
    // Objective: per axis v^T H v with v split into variable and fixed parts.
    for (int axis = 0; axis < 3; ++axis) {
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          const double hab = h(a, b);
          const bool va = vars[a] >= 0;
          const bool vb = vars[b] >= 0;
          if (va && vb) {
            prog.hessian(3 * vars[a] + axis, 3 * vars[b] + axis) += 2.0 * hab;
          } else if (va) {
            prog.linear(3 * vars[a] + axis) += 2.0 * hab * problem.points[j + b](axis);
          } else if (!vb) {
            prog.constant += hab * problem.points[j + a](axis) * problem.points[j + b](axis);
          }
        }
      }
    }
    if (!any) continue;
    for (const auto& [order, bound] : tables.spec().bounds) {
      const auto& s = tables.feasibility(order);
      for (int axis = 0; axis < 3; ++axis) {
        for (int r = 0; r < k; ++r) {
          LinearRow row;
          for (int i = 0; i < k; ++i) {
            if (vars[i] >= 0) {
              row.terms.emplace_back(3 * vars[i] + axis, s(r, i));
            } else {
              row.constant += s(r, i) * problem.points[j + i](axis);
            }
          }
          LinearRow neg = row;
          for (auto& t : neg.terms) t.second = -t.second;
          neg.constant = -neg.constant;
          row.constant -= bound(axis) + relaxation;
          neg.constant -= bound(axis) + relaxation;
          prog.rows.push_back(std::move(row));
          prog.rows.push_back(std::move(neg));
        }
      }
    }
  }
  for (int v = 0; v < layout.count(); ++v) {
    const int point = layout.point_of_var(v);
    const Ball& ball = problem.balls[point - problem.first - 1];
    prog.balls.push_back({3 * v, ball.center, ball.radius + relaxation});
    if (problem.box) {
      for (int axis = 0; axis < 3; ++axis) {
        prog.rows.push_back({{{3 * v + axis, 1.0}}, -problem.box->second(axis) - relaxation});
        prog.rows.push_back({{{3 * v + axis, -1.0}}, problem.box->first(axis) - relaxation});
      }
    }
  }
  return prog;
}

double row_value(const LinearRow& row, const Eigen::VectorXd& z) {
  double g = row.constant;
  for (const auto& [i, a] : row.terms) g += a * z(i);
  return g;
}

double ball_value(const BallRow& ball, const Eigen::VectorXd& z) {
  return (z.segment<3>(ball.var) - ball.center).squaredNorm() - ball.radius * ball.radius;
}

double objective_value(const Program& prog, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(prog.hessian * z) + prog.linear.dot(z) + prog.constant;
}

bool strictly_feasible(const Program& prog, const Eigen::VectorXd& z) {
  for (const auto& row : prog.rows) {
    if (!(row_value(row, z) < 0.0)) return false;
  }
  for (const auto& ball : prog.balls) {
    if (!(ball_value(ball, z) < 0.0)) return false;
  }
  return true;
}

// t f(z) - sum log(-g_i(z)); +inf outside the domain.
double barrier_value(const Program& prog, const Eigen::VectorXd& z, double t) {
  double acc = t * objective_value(prog, z);
  for (const auto& row : prog.rows) {
    const double g = row_value(row, z);
    if (!(g < 0.0)) return std::numeric_limits<double>::infinity();
    acc -= std::log(-g);
  }
  for (const auto& ball : prog.balls) {
    const double g = ball_value(ball, z);
    if (!(g < 0.0)) return std::numeric_limits<double>::infinity();
    acc -= std::log(-g);
  }
  return acc;
}

void barrier_derivatives(const Program& prog, const Eigen::VectorXd& z, double t,
                         Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  grad = t * (prog.hessian * z + prog.linear);
  hess = t * prog.hessian;
  for (const auto& row : prog.rows) {
    const double inv = -1.0 / row_value(row, z);
    for (const auto& [i, a] : row.terms) {
      grad(i) += a * inv;
      for (const auto& [j, b] : row.terms) hess(i, j) += a * b * inv * inv;
    }
  }
  for (const auto& ball : prog.balls) {
    const double inv = -1.0 / ball_value(ball, z);
    const Vec3 dg = 2.0 * (z.segment<3>(ball.var) - ball.center);
    grad.segment<3>(ball.var) += dg * inv;
    hess.block<3, 3>(ball.var, ball.var) +=
        dg * dg.transpose() * inv * inv + 2.0 * inv * Eigen::Matrix3d::Identity();
  }
}

}  // namespace

PlacementProblem make_placement_problem(const bspline::BasisTables& tables, PointList points,
                                        int first, int last, const ElasticTube& tube) {
  const int n = static_cast<int>(points.size());
  if (first < 0 || last >= n || last <= first) {
    throw std::invalid_argument("placement range must satisfy 0 <= first < last < size");
  }
  if (static_cast<int>(tube.size()) != last - first + 1) {
    throw std::invalid_argument("tube must have one ball per placement point");
  }
  PlacementProblem problem;
  problem.tables = &tables;
  problem.points = std::move(points);
  problem.first = first;
  problem.last = last;
  for (int i = 1; i < last - first; ++i) {
    problem.balls.push_back({tube.centers[i], std::max(tube.radii[i], 0.0)});
  }
  return problem;
}

double placement_objective(const PlacementProblem& problem, const PointList& points) {
  const auto& tables = *problem.tables;
  const int k = tables.k();
  const auto [j0, j1] = touched_spans(static_cast<int>(points.size()), k, problem.first,
                                      problem.last);
  double cost = 0.0;
  for (int j = j0; j <= j1; ++j) {
    cost += bspline::span_control_cost(tables, bspline::make_span(points, j, k));
  }
  return cost;
}

double max_constraint_violation(const PlacementProblem& problem, const PointList& points) {
  const auto& tables = *problem.tables;
  const int k = tables.k();
  const int n = static_cast<int>(points.size());
  if (n != static_cast<int>(problem.points.size())) return std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  // Everything outside the interior is fixed context, endpoints included.
  for (int i = 0; i < n; ++i) {
    if (i > problem.first && i < problem.last) continue;
    worst = std::max(worst, (points[i] - problem.points[i]).cwiseAbs().maxCoeff());
  }
  for (int i = problem.first + 1; i < problem.last; ++i) {
    const Ball& ball = problem.balls[i - problem.first - 1];
    if (ball.radius < kPinnedRadius) {
      worst = std::max(worst, (points[i] - problem.points[i]).cwiseAbs().maxCoeff());
    } else {
      worst = std::max(worst, (points[i] - ball.center).norm() - ball.radius);
    }
    if (problem.box) {
      worst = std::max(worst, (points[i] - problem.box->second).maxCoeff());
      worst = std::max(worst, (problem.box->first - points[i]).maxCoeff());
    }
  }
  const auto [j0, j1] = touched_spans(n, k, problem.first, problem.last);
  for (int j = j0; j <= j1; ++j) {
    const auto report = bspline::check_span_feasible(tables, bspline::make_span(points, j, k));
    for (const auto& [order, margin] : report.margins) worst = std::max(worst, -margin);
  }
  return worst;
}

QcqpResult solve_placement_qcqp(const PlacementProblem& problem, const QcqpOptions& options) {
  if (problem.tables == nullptr) throw std::invalid_argument("placement problem needs tables");
  if (static_cast<int>(problem.balls.size()) != std::max(problem.last - problem.first - 1, 0)) {
    throw std::invalid_argument("placement problem needs one ball per interior point");
  }
  QcqpResult result;
  result.points = problem.points;
  result.initial_objective = placement_objective(problem, problem.points);
  result.objective = result.initial_objective;

  const double v0 = max_constraint_violation(problem, problem.points);
  if (v0 > options.feasibility_tolerance) {
    std::ostringstream why;
    why << "initial placement violates constraints by " << v0;
    result.rejected = true;
    result.diagnostic = why.str();
    return result;
  }

  const Layout layout(problem);
  if (layout.count() == 0) {
    result.converged = true;
    return result;
  }
  const Program prog = assemble(problem, layout, options.relaxation);
  const Eigen::VectorXd z0 = layout.pack(problem.points);
  if (!strictly_feasible(prog, z0)) {
    result.rejected = true;
    result.diagnostic = "initial placement is on the boundary beyond the relaxation";
    return result;
  }

  const double f0 = objective_value(prog, z0);
  const double constraints = static_cast<double>(prog.rows.size() + prog.balls.size());
  const double gap_target = options.gap_tolerance * std::max(std::abs(f0), 1e-9);
  double t = constraints / std::max(std::abs(f0), 1e-6);

  Eigen::VectorXd z = z0;
  Eigen::VectorXd best = z0;
  double best_f = f0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  int steps = 0;
  bool budget_hit = false;
  while (true) {
    // Centering.
    while (steps < options.max_newton_steps) {
      barrier_derivatives(prog, z, t, grad, hess);
      hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      const Eigen::VectorXd dz = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dz);
      if (!std::isfinite(decrement) || decrement <= options.centering_tolerance) break;
      const double phi = barrier_value(prog, z, t);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        const Eigen::VectorXd trial = z + alpha * dz;
        const double phi_trial = barrier_value(prog, trial, t);
        if (phi_trial <= phi - 0.25 * alpha * decrement) {
          z = trial;
          moved = true;
          break;
        }
      }
      ++steps;
      // A tiny accepted step means the model no longer predicts progress.
      if (!moved || alpha < 1e-4) break;
      const double f = objective_value(prog, z);
      if (f < best_f) {
        best_f = f;
        best = z;
      }
    }
    if (steps >= options.max_newton_steps) {
      budget_hit = true;
      break;
    }
    if (constraints / t <= gap_target) break;
    t *= options.barrier_growth;
  }
  result.newton_steps = steps;
  result.converged = !budget_hit;
  if (budget_hit) result.diagnostic = "newton step cap reached; returning best iterate";

  // The barrier runs on slightly relaxed constraints; pull the answer back
  // toward the (feasible) start until the exact constraints hold again.
  // Convexity keeps every such blend at or below the initial objective.
  const double allowed = std::max(v0, 0.0);
  PointList candidate = problem.points;
  layout.unpack(best, candidate);
  if (max_constraint_violation(problem, candidate) > allowed) {
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      PointList blend = problem.points;
      layout.unpack(z0 + mid * (best - z0), blend);
      if (max_constraint_violation(problem, blend) <= allowed) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    candidate = problem.points;
    layout.unpack(z0 + lo * (best - z0), candidate);
  }
  const double final_objective = placement_objective(problem, candidate);
  if (final_objective <= result.initial_objective) {
    result.points = std::move(candidate);
    result.objective = final_objective;
  }
  return result;
}

}  // namespace rbk::elastic
