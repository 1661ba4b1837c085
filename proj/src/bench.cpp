#include "rbk/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rbk/elastic.hpp"

namespace rbk::bench {

TimingRow TimingRow::of(const std::vector<double>& samples) {
  TimingRow row;
  row.count = static_cast<int>(samples.size());
  if (samples.empty()) return row;
  double sum = 0.0;
  for (double s : samples) {
    sum += s;
    row.max = std::max(row.max, s);
  }
  row.avg = sum / samples.size();
  double var = 0.0;
  for (double s : samples) var += (s - row.avg) * (s - row.avg);
  row.std = std::sqrt(var / samples.size());
  return row;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool same_bits(const Vec3& a, const Vec3& b) { return std::memcmp(a.data(), b.data(), sizeof(double) * 3) == 0; }

// Obstacle points on the grid lattice inside the box.
env::PointList rasterize_box(const env::GridSpec& grid, const Vec3& lo, const Vec3& hi) {
  env::PointList pts;
  const double r = grid.resolution;
  Eigen::Vector3i a, b;
  for (int i = 0; i < 3; ++i) {
    a(i) = static_cast<int>(std::ceil((lo(i) - grid.origin(i)) / r - 1e-9));
    b(i) = static_cast<int>(std::floor((hi(i) - grid.origin(i)) / r + 1e-9));
  }
  for (int z = a.z(); z <= b.z(); ++z) {
    for (int y = a.y(); y <= b.y(); ++y) {
      for (int x = a.x(); x <= b.x(); ++x) pts.push_back(grid.origin + Vec3(x, y, z) * r);
    }
  }
  if (pts.empty()) pts.push_back(0.5 * (lo + hi));
  return pts;
}

void audit_optimization(const replan::OptimizationRecord& rec, RunStats& stats) {
  ++stats.eo_calls;
  if (rec.rejected) {
    ++stats.eo_rejected;
    return;
  }
  if (rec.objective > rec.initial_objective + 1e-9) ++stats.eo_objective_violations;
  if (rec.max_violation > 1e-6) ++stats.eo_constraint_violations;
  if (!rec.endpoints_pinned) ++stats.eo_pin_violations;
}

void trajectory_metrics(const bspline::Trajectory& traj, const env::OccupancyWorld& world,
                        double t_end, double step, int samples_per_span, RunStats& stats) {
  const auto& tables = traj.tables();
  t_end = std::min(t_end, traj.end_time());
  double speed_sum = 0.0;
  int count = 0;
  Vec3 prev = traj.evaluate(traj.start_time(), 0);
  for (double t = traj.start_time(); t <= t_end + 1e-12; t += step) {
    const Vec3 p = traj.evaluate(t, 0);
    const Vec3 v = traj.evaluate(t, 1);
    const Vec3 a = traj.evaluate(t, 2);
    stats.length += (p - prev).norm();
    prev = p;
    speed_sum += v.norm();
    ++count;
    stats.max_axis_velocity = std::max(stats.max_axis_velocity, v.cwiseAbs().maxCoeff());
    stats.max_axis_acceleration = std::max(stats.max_axis_acceleration, a.cwiseAbs().maxCoeff());
  }
  stats.mean_speed = count > 0 ? speed_sum / count : 0.0;
  stats.duration = t_end - traj.start_time();
  stats.min_clearance = elastic::sampled_clearance(tables, traj.points(), world, 0,
                                                   traj.span_count() - 1, samples_per_span);
  // Dense per-span check of the derivative bounds, independent of S.
  const auto& bounds = tables.spec().bounds;
  for (int j = 0; j < traj.span_count(); ++j) {
    bool ok = bspline::check_span_feasible(tables, bspline::make_span(traj.points(), j, tables.k()))
                  .feasible;
    for (int s = 0; s <= samples_per_span && ok; ++s) {
      const double u = static_cast<double>(s) / samples_per_span;
      for (const auto& [order, bound] : bounds) {
        const Vec3 d = traj.evaluate_span(j, u, order);
        if (((d.cwiseAbs() - bound).array() > 1e-9).any()) ok = false;
      }
    }
    if (!ok) ++stats.feasibility_violations;
  }
}

}  // namespace

RunStats stats_from_events(const std::vector<std::string>& lines) {
  RunStats stats;
  std::vector<double> rbk, tube, qcqp, opt;
  for (const auto& line : lines) {
    std::istringstream in(line);
    std::string token, kind;
    std::vector<std::pair<std::string, std::string>> fields;
    while (in >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      fields.emplace_back(token.substr(0, eq), token.substr(eq + 1));
    }
    for (const auto& [key, value] : fields) {
      if (key == "event") kind = value;
    }
    if (kind == "replan") ++stats.replans;
    if (kind == "stop") ++stats.stops;
    for (const auto& [key, value] : fields) {
      if (key == "rbk_s") rbk.push_back(std::stod(value));
      if (key == "tube_s") tube.push_back(std::stod(value));
      if (key == "qcqp_s") qcqp.push_back(std::stod(value));
      if (key == "opt_s") opt.push_back(std::stod(value));
      if (kind == "replan" && key == "status" && value != "success") ++stats.replan_failures;
      if (kind == "replan" && key == "detail" && value.rfind("trigger=collision", 0) == 0) {
        ++stats.collision_replans;
      }
      if (kind == "goal" && key == "detail" && value == "reached") ++stats.goals_reached;
    }
  }
  stats.rbk = TimingRow::of(rbk);
  stats.tube = TimingRow::of(tube);
  stats.trajectory_opt = TimingRow::of(qcqp);
  stats.total_opt = TimingRow::of(opt);
  stats.opt_calls = stats.trajectory_opt.count;
  return stats;
}

RunResult run_scenario(const Scenario& scenario) {
  RunResult result;
  env::WorldPtr world = build_world(scenario);
  result.tables = bspline::BasisTables::make(scenario.spline);
  const replan::Planner planner(result.tables, scenario.planner);
  const int k = result.tables->k();
  const double robot_radius = scenario.clearances.robot_radius;

  RunStats audit;
  std::string failure;
  replan::PlanState& state = result.state;
  bool started = false;
  try {
    state = planner.init_plan(scenario.start, scenario.goals.front(), world);
    started = true;
  } catch (const std::exception& e) {
    failure = e.what();
  }

  std::vector<ObstacleInsertion> pending = scenario.insertions;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  std::size_t next_insertion = 0;
  std::size_t goal_index = 0;
  std::size_t audited = 0;
  bool finished = false;
  while (started && state.clock < scenario.max_time) {
    bool changed = false;
    env::PointList obstacles = world->obstacles();
    while (next_insertion < pending.size() && pending[next_insertion].time <= state.clock + 1e-12) {
      const auto& ins = pending[next_insertion++];
      const auto added = rasterize_box(world->grid(), ins.min, ins.max);
      obstacles.insert(obstacles.end(), added.begin(), added.end());
      changed = true;
    }
    if (changed) world = env::OccupancyWorld::build(std::move(obstacles), world->grid(), world->clearances());

    const bspline::PointList before = state.points;
    const int committed_before = state.committed_end;
    const int replans_before = state.replans;
    planner.step(state, world, scenario.sim_step);

    for (int i = 0; i < committed_before; ++i) {
      if (i >= static_cast<int>(state.points.size()) || !same_bits(before[i], state.points[i])) {
        ++audit.prefix_violations;
        break;
      }
    }
    if (state.replans != replans_before && state.points != before) {
      // The splice sits at the end of span f - k, f = first mutable index.
      const int f = state.committed_end;
      const bspline::Trajectory old_traj(result.tables, before, state.t0);
      const bspline::Trajectory new_traj(result.tables, state.points, state.t0);
      if (f - k + 1 < new_traj.span_count()) {
        for (int order = 0; order <= k - 2; ++order) {
          const Vec3 left = old_traj.evaluate_span(f - k, 1.0, order);
          const Vec3 right = new_traj.evaluate_span(f - k + 1, 0.0, order);
          if ((left - right).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, left.norm())) {
            ++audit.continuity_violations;
            break;
          }
        }
      }
    }
    if (state.committed_end > committed_before) {
      const int from = std::max(0, committed_before - k + 1);
      const int to = state.committed_end - k;
      if (to >= from &&
          elastic::sampled_clearance(*result.tables, state.points, *world, from, to,
                                     scenario.planner.samples_per_span) <= robot_radius) {
        ++audit.clearance_violations;
      }
    }
    for (; audited < state.optimizations.size(); ++audited) {
      audit_optimization(state.optimizations[audited], audit);
    }
    if (state.halted) {
      failure = "stopping policy: committed trajectory collides";
      break;
    }
    if (state.reached) {
      if (++goal_index == scenario.goals.size()) {
        finished = true;
        break;
      }
      planner.retarget(state, scenario.goals[goal_index], world);
    }
  }
  for (; audited < state.optimizations.size(); ++audited) {
    audit_optimization(state.optimizations[audited], audit);
  }
  if (started && !finished && failure.empty()) failure = "time limit reached before the last goal";

  for (const auto& e : state.events) result.event_lines.push_back(e.line());
  RunStats stats = stats_from_events(result.event_lines);
  stats.prefix_violations = audit.prefix_violations;
  stats.continuity_violations = audit.continuity_violations;
  stats.clearance_violations = audit.clearance_violations;
  stats.eo_calls = audit.eo_calls;
  stats.eo_objective_violations = audit.eo_objective_violations;
  stats.eo_constraint_violations = audit.eo_constraint_violations;
  stats.eo_pin_violations = audit.eo_pin_violations;
  stats.eo_rejected = audit.eo_rejected;
  if (started) {
    const bspline::Trajectory traj(result.tables, state.points, state.t0);
    trajectory_metrics(traj, *world, state.clock, scenario.sample_step,
                       scenario.planner.samples_per_span, stats);
    if (pending.empty() && stats.min_clearance <= robot_radius) ++stats.clearance_violations;
  }
  stats.invariant_violations = stats.prefix_violations + stats.continuity_violations +
                               stats.feasibility_violations + stats.clearance_violations +
                               stats.eo_objective_violations + stats.eo_constraint_violations +
                               stats.eo_pin_violations + stats.eo_rejected;
  if (failure.empty() && stats.invariant_violations > 0) failure = "invariant violations";
  stats.success = failure.empty();
  stats.failure = failure;
  result.stats = stats;
  result.final_world = world;
  return result;
}

void write_stats_csv(std::ostream& out, const RunStats& s) {
  out << "# run statistics; times in seconds\n";
  out << "component,avg,max,std,count\n";
  auto row = [&](const char* name, const TimingRow& r) {
    out << name << ',' << fmt(r.avg) << ',' << fmt(r.max) << ',' << fmt(r.std) << ',' << r.count
        << '\n';
  };
  row("rbk_search", s.rbk);
  row("tube_expansion", s.tube);
  row("trajectory_optimization", s.trajectory_opt);
  row("total_optimization", s.total_opt);
  out << "# summary; lengths in m, speeds in m/s, accelerations in m/s^2, durations in s\n";
  out << "key,value\n";
  out << "success," << (s.success ? 1 : 0) << '\n';
  out << "replans," << s.replans << '\n';
  out << "replan_failures," << s.replan_failures << '\n';
  out << "collision_replans," << s.collision_replans << '\n';
  out << "opt_calls," << s.opt_calls << '\n';
  out << "goals_reached," << s.goals_reached << '\n';
  out << "stops," << s.stops << '\n';
  out << "mean_speed," << fmt(s.mean_speed) << '\n';
  out << "max_axis_velocity," << fmt(s.max_axis_velocity) << '\n';
  out << "max_axis_acceleration," << fmt(s.max_axis_acceleration) << '\n';
  out << "length," << fmt(s.length) << '\n';
  out << "duration," << fmt(s.duration) << '\n';
  out << "min_clearance," << fmt(s.min_clearance) << '\n';
  out << "invariant_violations," << s.invariant_violations << '\n';
  out << "eo_calls," << s.eo_calls << '\n';
  if (!s.failure.empty()) out << "failure,\"" << s.failure << "\"\n";
}

void write_trajectory_csv(std::ostream& out, const bspline::Trajectory& traj, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("sample step must be > 0");
  out << "# trajectory k=" << traj.tables().k() << " dt=" << fmt(traj.tables().dt())
      << " t0=" << fmt(traj.start_time()) << '\n';
  out << "# units: t s; x y z m; vx vy vz m/s; ax ay az m/s^2\n";
  out << "t,x,y,z,vx,vy,vz,ax,ay,az\n";
  const double t0 = traj.start_time();
  const double t1 = traj.end_time();
  const long samples = static_cast<long>(std::floor((t1 - t0) / step + 1e-9));
  auto emit = [&](double t) {
    const Vec3 p = traj.evaluate(t, 0), v = traj.evaluate(t, 1), a = traj.evaluate(t, 2);
    out << fmt(t);
    for (const Vec3* x : {&p, &v, &a}) {
      for (int i = 0; i < 3; ++i) out << ',' << fmt((*x)(i));
    }
    out << '\n';
  };
  for (long i = 0; i <= samples; ++i) emit(t0 + i * step);
  if (t0 + samples * step < t1 - 1e-12) emit(t1);
  out << "# control_points\n";
  out << "i,x,y,z\n";
  for (std::size_t i = 0; i < traj.points().size(); ++i) {
    const Vec3& p = traj.points()[i];
    out << i << ',' << fmt(p.x()) << ',' << fmt(p.y()) << ',' << fmt(p.z()) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing trajectory");
}

TrajectoryFile read_trajectory_csv(std::istream& in) {
  TrajectoryFile file;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# trajectory", 0) != 0) {
    throw std::runtime_error("trajectory file: missing '# trajectory' header");
  }
  {
    std::istringstream header(line.substr(12));
    std::string token;
    while (header >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
      if (key == "k") file.k = std::stoi(value);
      if (key == "dt") file.dt = std::stod(value);
      if (key == "t0") file.t0 = std::stod(value);
    }
  }
  bool points = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "# control_points") {
      points = true;
      continue;
    }
    if (line[0] == '#' || line[0] == 't' || line[0] == 'i') continue;
    std::vector<double> values;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) values.push_back(std::stod(cell));
    if (points) {
      if (values.size() != 4) throw std::runtime_error("trajectory file: bad control point row");
      file.control_points.emplace_back(values[1], values[2], values[3]);
    } else {
      if (values.size() != 10) throw std::runtime_error("trajectory file: bad sample row");
      std::array<double, 10> row;
      std::copy(values.begin(), values.end(), row.begin());
      file.rows.push_back(row);
    }
  }
  if (file.k < 2 || !(file.dt > 0.0)) throw std::runtime_error("trajectory file: bad header");
  return file;
}

void write_plot_script(std::ostream& out, const std::string& data_file) {
  out << "import io\n"
         "import sys\n\n"
         "import matplotlib.pyplot as plt\n"
         "import numpy as np\n\n"
         "path = sys.argv[1] if len(sys.argv) > 1 else \""
      << data_file
      << "\"\n"
         "text = open(path).read()\n"
         "samples, points = text.split(\"# control_points\")\n"
         "rows = np.loadtxt(io.StringIO(samples), delimiter=\",\", comments=\"#\", skiprows=3)\n"
         "cps = np.loadtxt(io.StringIO(points), delimiter=\",\", skiprows=2, ndmin=2)\n"
         "fig = plt.figure(figsize=(10, 4))\n"
         "ax = fig.add_subplot(1, 2, 1, projection=\"3d\")\n"
         "ax.plot(rows[:, 1], rows[:, 2], rows[:, 3], label=\"trajectory\")\n"
         "ax.plot(cps[:, 1], cps[:, 2], cps[:, 3], \".\", ms=3, label=\"control points\")\n"
         "ax.legend()\n"
         "bx = fig.add_subplot(1, 2, 2)\n"
         "bx.plot(rows[:, 0], np.linalg.norm(rows[:, 4:7], axis=1), label=\"|v| m/s\")\n"
         "bx.plot(rows[:, 0], np.abs(rows[:, 7:10]).max(axis=1), label=\"max |a_i| m/s^2\")\n"
         "bx.set_xlabel(\"t [s]\")\n"
         "bx.legend()\n"
         "fig.tight_layout()\n"
         "plt.savefig(path + \".png\", dpi=120)\n";
}

}  // namespace rbk::bench
