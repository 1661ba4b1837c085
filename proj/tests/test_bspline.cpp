#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rbk/bspline.hpp"

using namespace rbk;
using bspline::PointList;
using bspline::Vec3;

namespace {

bspline::UniformBsplineSpec spec_for(int k, double dt = 0.2) {
  bspline::UniformBsplineSpec s;
  s.k = k;
  s.dt = dt;
  s.weights.assign(static_cast<std::size_t>(std::max(k - 2, 1)), 0.0);
  s.weights.back() = 1.0;
  s.bounds.clear();
  if (k >= 2) s.bounds[1] = Vec3::Constant(2.0);
  if (k >= 3) s.bounds[2] = Vec3::Constant(3.0);
  return s;
}

bspline::Span random_span(std::mt19937_64& rng, int k, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  bspline::Span s;
  s.points.resize(k, 3);
  for (int i = 0; i < k; ++i) s.points.row(i) = Eigen::RowVector3d(u(rng), u(rng), u(rng));
  return s;
}

}  // namespace

TEST(BasisMatrix, CubicMatchesClosedForm) {
  Eigen::Matrix4d expected;
  expected << 1, 4, 1, 0, -3, 0, 3, 0, 3, -6, 3, 0, -1, 3, -3, 1;
  expected /= 6.0;
  EXPECT_LT((bspline::basis_matrix(4) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BasisMatrix, LinearMatchesClosedForm) {
  Eigen::Matrix2d expected;
  expected << 1, 0, -1, 1;
  EXPECT_LT((bspline::basis_matrix(2) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BasisMatrix, AgreesWithRecursionForAllOrders) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 2; k <= 8; ++k) {
    const Eigen::MatrixXd m = bspline::basis_matrix(k);
    for (int trial = 0; trial < 200; ++trial) {
      const double u = unit(rng);
      const Eigen::RowVectorXd weights = oracle::power_row(u, k) * m;
      for (int i = 0; i < k; ++i) {
        EXPECT_NEAR(weights(i), oracle::uniform_basis(i, k, k - 1 + u), 1e-10) << "k=" << k;
      }
    }
  }
}

TEST(BasisMatrix, PartitionOfUnity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 2; k <= 8; ++k) {
    const Eigen::MatrixXd m = bspline::basis_matrix(k);
    for (int trial = 0; trial < 1000; ++trial) {
      const Eigen::RowVectorXd w = oracle::power_row(unit(rng), k) * m;
      EXPECT_NEAR(w.sum(), 1.0, 1e-12);
      EXPECT_GE(w.minCoeff(), -1e-12);
    }
  }
}

TEST(BasisMatrix, RejectsOrderBelowTwo) {
  EXPECT_THROW(bspline::basis_matrix(1), std::invalid_argument);
}

TEST(DerivativeMap, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int k : {4, 6}) {
    const auto tables = bspline::BasisTables::make(spec_for(k));
    const auto span = random_span(rng, k, 1.0);
    const double h = 1e-4;
    for (double u : {0.2, 0.5, 0.8}) {
      for (int l = 1; l <= std::min(3, k - 1); ++l) {
        const Vec3 lo = bspline::evaluate(*tables, span, u - h, l - 1);
        const Vec3 hi = bspline::evaluate(*tables, span, u + h, l - 1);
        const Vec3 fd = (hi - lo) / (2.0 * h * tables->dt());
        const Vec3 exact = bspline::evaluate(*tables, span, u, l);
        EXPECT_LT((fd - exact).norm(), 1e-5 * std::max(1.0, exact.norm())) << "k=" << k << " l=" << l;
      }
    }
  }
}

TEST(SpecValidation, RejectsBadParameters) {
  auto s = spec_for(6);
  s.dt = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = spec_for(6);
  s.weights = {-1.0, 0.0, 0.0, 1.0};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = spec_for(6);
  s.bounds[1] = Vec3(2.0, -1.0, 2.0);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(spec_for(6).validate());
}

TEST(ControlCost, CollinearVelocityOnlyCost) {
  auto s = spec_for(4);
  s.weights = {1.0, 0.0};
  const auto tables = bspline::BasisTables::make(s);
  const double d = 0.3;
  PointList pts;
  for (int i = 0; i < 4; ++i) pts.push_back(Vec3(i * d, 0.0, 0.0));
  const double cost = bspline::span_control_cost(*tables, bspline::make_span(pts, 0, 4));
  EXPECT_NEAR(cost, d * d / s.dt, 1e-12);
}

TEST(ControlCost, MatchesQuadrature) {
  std::mt19937_64 rng(11);
  for (int k : {4, 5, 6}) {
    auto s = spec_for(k);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    for (auto& x : s.weights) x = w(rng);
    const auto tables = bspline::BasisTables::make(s);
    for (int trial = 0; trial < 20; ++trial) {
      const auto span = random_span(rng, k, 1.0);
      const double expected = oracle::quadrature_cost(*tables, span);
      EXPECT_NEAR(bspline::span_control_cost(*tables, span), expected, 1e-8 * std::max(1.0, expected));
    }
  }
}

TEST(ControlCost, ReversalSymmetry) {
  std::mt19937_64 rng(13);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  for (int trial = 0; trial < 50; ++trial) {
    const auto span = random_span(rng, 6, 0.5);
    bspline::Span reversed;
    reversed.points = span.points.colwise().reverse();
    EXPECT_NEAR(bspline::span_control_cost(*tables, span),
                bspline::span_control_cost(*tables, reversed),
                1e-9 * std::max(1.0, bspline::span_control_cost(*tables, span)));
    EXPECT_EQ(bspline::check_span_feasible(*tables, span).feasible,
              bspline::check_span_feasible(*tables, reversed).feasible);
  }
}

TEST(ControlCost, StaticSpanIsFree) {
  const auto tables = bspline::BasisTables::make(spec_for(6));
  const PointList pts(6, Vec3(1.0, 2.0, 3.0));
  EXPECT_NEAR(bspline::span_control_cost(*tables, bspline::make_span(pts, 0, 6)), 0.0, 1e-12);
}

TEST(Evaluation, ConvexHull) {
  std::mt19937_64 rng(17);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  for (int trial = 0; trial < 100; ++trial) {
    const auto span = random_span(rng, 6, 2.0);
    const Vec3 lo = span.points.colwise().minCoeff().transpose();
    const Vec3 hi = span.points.colwise().maxCoeff().transpose();
    for (int i = 0; i <= 50; ++i) {
      const Vec3 c = bspline::evaluate(*tables, span, i / 50.0, 0);
      EXPECT_TRUE(((c - lo).array() >= -1e-12).all() && ((hi - c).array() >= -1e-12).all());
    }
  }
}

TEST(Evaluation, LocalControl) {
  std::mt19937_64 rng(19);
  const int k = 6;
  const auto tables = bspline::BasisTables::make(spec_for(k));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointList pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  const int moved = 10;
  PointList changed = pts;
  changed[moved] += Vec3(0.3, -0.2, 0.1);
  const bspline::Trajectory a(tables, pts), b(tables, changed);
  for (int span = 0; span < a.span_count(); ++span) {
    const bool touches = span <= moved && moved < span + k;
    for (double s : {0.0, 0.37, 0.9}) {
      const double diff = (a.evaluate_span(span, s, 0) - b.evaluate_span(span, s, 0)).norm();
      if (touches) {
        if (s > 0.0) {
          EXPECT_GT(diff, 0.0);
        }
      } else {
        EXPECT_EQ(diff, 0.0) << "span " << span;
      }
    }
  }
}

TEST(Evaluation, DuplicatedPointIsInterpolated) {
  const int k = 6;
  const auto tables = bspline::BasisTables::make(spec_for(k));
  const Vec3 p(1.0, -2.0, 0.5);
  PointList pts{Vec3(0, 0, 0)};
  for (int i = 0; i < k - 1; ++i) pts.push_back(p);
  pts.push_back(Vec3(3, 3, 3));
  const bspline::Trajectory traj(tables, pts);
  // Span 1 consists of the k-1 copies and one more point with zero weight at u = 0.
  EXPECT_LT((traj.evaluate_span(1, 0.0, 0) - p).norm(), 1e-9);
}

TEST(Feasibility, CollinearConstantVelocity) {
  const int k = 6;
  const double d = 0.3;
  auto s = spec_for(k);
  PointList pts;
  for (int i = 0; i < k; ++i) pts.push_back(Vec3(i * d, 0.0, 0.0));
  const auto span = bspline::make_span(pts, 0, k);
  const double v = d / s.dt;
  for (int i = 0; i <= 20; ++i) {
    const auto tables = bspline::BasisTables::make(s);
    EXPECT_NEAR(bspline::evaluate(*tables, span, i / 20.0, 1).x(), v, 1e-9);
  }
  s.bounds[1] = Vec3::Constant(1.01 * v);
  EXPECT_TRUE(bspline::check_span_feasible(*bspline::BasisTables::make(s), span).feasible);
  s.bounds[1] = Vec3::Constant(0.9 * v);
  const auto report = bspline::check_span_feasible(*bspline::BasisTables::make(s), span);
  EXPECT_FALSE(report.feasible);
  EXPECT_NEAR(report.margins.at(1), 0.9 * v - v, 1e-9);
}

TEST(Feasibility, HotPathAgreesWithReport) {
  std::mt19937_64 rng(23);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  for (int trial = 0; trial < 500; ++trial) {
    const auto span = random_span(rng, 6, 0.08);
    EXPECT_EQ(bspline::check_span_feasible(*tables, span).feasible,
              bspline::span_feasible(*tables, span.points, 0.0));
  }
}

TEST(Feasibility, SoundUnderDenseSampling) {
  std::mt19937_64 rng(29);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  int feasible = 0, violations = 0;
  while (feasible < 1000) {
    const auto span = random_span(rng, 6, 0.06);
    if (!bspline::check_span_feasible(*tables, span).feasible) continue;
    ++feasible;
    const auto peaks = oracle::sampled_peaks(*tables, span, 200);
    for (const auto& [order, peak] : peaks) {
      if (((peak - tables->spec().bounds.at(order)).array() > 1e-9).any()) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(Feasibility, ConservativeWitnessExists) {
  std::mt19937_64 rng(31);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  bool witness = false;
  for (int trial = 0; trial < 20000 && !witness; ++trial) {
    const auto span = random_span(rng, 6, 0.08);
    if (bspline::check_span_feasible(*tables, span).feasible) continue;
    bool within = true;
    for (const auto& [order, peak] : oracle::sampled_peaks(*tables, span, 400)) {
      if (((peak - tables->spec().bounds.at(order)).array() > 0.0).any()) within = false;
    }
    witness = within;
  }
  EXPECT_TRUE(witness);
}

TEST(Refine, DeviationShrinksAndPolylineIsKept) {
  std::mt19937_64 rng(37);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointList pts;
  for (int i = 0; i < 10; ++i) pts.push_back(Vec3(i * 0.3, u(rng), u(rng) * 0.3));
  const double before = bspline::max_polyline_deviation(*tables, pts);
  const auto refined = bspline::refine_toward_polyline(*tables, pts, 0.02);
  EXPECT_TRUE(refined.converged);
  EXPECT_LE(refined.max_deviation, 0.02);
  EXPECT_LE(refined.max_deviation, before);
  EXPECT_EQ(refined.points.front(), pts.front());
  EXPECT_EQ(refined.points.back(), pts.back());
  for (const auto& p : refined.points) {
    EXPECT_LT(oracle::polyline_distance(pts, p), 1e-12);
  }
}

TEST(Refine, EachPassDoesNotIncreaseDeviation) {
  std::mt19937_64 rng(41);
  const auto tables = bspline::BasisTables::make(spec_for(6));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointList pts;
  for (int i = 0; i < 8; ++i) pts.push_back(Vec3(u(rng), u(rng), u(rng)));
  double previous = bspline::max_polyline_deviation(*tables, pts);
  // Refining with ever tighter tolerances walks the same pass sequence.
  for (double tol : {0.2, 0.1, 0.05, 0.025}) {
    const auto r = bspline::refine_toward_polyline(*tables, pts, tol);
    EXPECT_LE(r.max_deviation, previous + 1e-12);
    previous = r.max_deviation;
  }
}

TEST(Trajectory, EvaluationClampsToHorizon) {
  const auto tables = bspline::BasisTables::make(spec_for(6));
  PointList pts;
  for (int i = 0; i < 9; ++i) pts.push_back(Vec3(i * 0.1, 0.0, 0.0));
  const bspline::Trajectory traj(tables, pts, 1.0);
  EXPECT_EQ(traj.span_count(), 4);
  EXPECT_DOUBLE_EQ(traj.end_time(), 1.0 + 4 * 0.2);
  EXPECT_EQ(traj.evaluate(-5.0), traj.evaluate(1.0));
  EXPECT_EQ(traj.evaluate(50.0), traj.evaluate(traj.end_time()));
}
