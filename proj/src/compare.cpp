#include "rbk/compare.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace rbk::bench {

using bspline::Vec3;

namespace {

using Clock = std::chrono::steady_clock;

// Repeats `fn` until at least `min_seconds` elapsed; returns seconds per call.
template <typename Fn>
double time_per_call(Fn&& fn, double min_seconds) {
  const auto start = Clock::now();
  int calls = 0;
  double elapsed = 0.0;
  do {
    fn();
    ++calls;
    elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  } while (elapsed < min_seconds && calls < 1000);
  return elapsed / calls;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrialRecord run_trial(const CompareConfig& config, int trial) {
  TrialRecord rec;
  rec.trial = trial;
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);

  env::GridSpec grid;
  grid.resolution = config.resolution;
  grid.dims = Eigen::Vector3i(config.grid.x(), config.grid.y(), 1);
  grid.origin = Vec3::Constant(0.5 * config.resolution);
  std::uniform_int_distribution<int> ux(0, grid.dims.x() - 1), uy(0, grid.dims.y() - 1);

  std::vector<int> taken(grid.cell_count(), 0);
  env::PointList obstacles;
  for (int placed = 0, guard = 0; placed < config.obstacle_cells && guard < 100000; ++guard) {
    const env::Cell c(ux(rng), uy(rng), 0);
    const int idx = c.y() * grid.dims.x() + c.x();
    if (taken[idx]) continue;
    taken[idx] = 1;
    obstacles.push_back(grid.origin + c.cast<double>() * grid.resolution);
    ++placed;
  }
  const auto world = env::OccupancyWorld::build(obstacles, grid, config.clearances);
  const env::GridGraph graph(world, env::ClearanceLevel::kRbk, 26);
  const auto tables = bspline::BasisTables::make(config.spline);
  const int k = tables->k();

  // Start: random free cell entered along a random feasible span pattern.
  bspline::PointList init;
  std::uniform_int_distribution<int> step(-1, 1);
  std::discrete_distribution<int> nudge({1.0, 2.0, 1.0});
  for (int attempt = 0; attempt < 2000 && init.empty(); ++attempt) {
    const env::Cell end(ux(rng), uy(rng), 0);
    if (!graph.free(end)) continue;
    std::vector<Eigen::Vector2i> offsets(k, Eigen::Vector2i::Zero());
    Eigen::Vector2i vel(step(rng), step(rng));
    for (int i = 1; i < k; ++i) {
      offsets[i] = offsets[i - 1] + vel;
      for (int a = 0; a < 2; ++a) vel(a) = std::clamp(vel(a) + nudge(rng) - 1, -1, 1);
    }
    bspline::PointList pts;
    bool ok = true;
    for (int i = 0; i < k && ok; ++i) {
      const Eigen::Vector2i rel = offsets[i] - offsets[k - 1];
      const env::Cell c(end.x() + rel.x(), end.y() + rel.y(), 0);
      ok = graph.free(c);
      pts.push_back(world->center(c));
    }
    if (!ok) continue;
    const bspline::Span span = bspline::make_span(pts, 0, k);
    if (!bspline::check_span_feasible(*tables, span).feasible) continue;
    init = pts;
  }
  if (init.empty()) {
    rec.skipped = true;
    rec.reason = "no feasible start pattern";
    return rec;
  }
  for (int i = 1; i < k; ++i) rec.moving_start = rec.moving_start || init[i] != init[0];

  const env::Cell start_cell = world->cell_of(init.back());
  env::Cell goal_cell = start_cell;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const env::Cell c(ux(rng), uy(rng), 0);
    if (!graph.free(c)) continue;
    if ((c - start_cell).cwiseAbs().maxCoeff() < config.min_goal_cells) continue;
    goal_cell = c;
    break;
  }
  if (goal_cell == start_cell) {
    rec.skipped = true;
    rec.reason = "no goal cell far enough";
    return rec;
  }
  const Vec3 goal = world->center(goal_cell);

  search::SearchQuery query;
  query.init = init;
  query.goal = search::static_span(goal, k);
  query.tables = tables;
  query.graph = &graph;
  query.time_weight = search::auto_time_weight(*tables, init, goal, graph);
  rec.time_weight = query.time_weight;

  baselines::FullSearchResult oracle;
  auto start = Clock::now();
  oracle = baselines::full_span_search(query, config.oracle);
  rec.oracle_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  rec.oracle_states = oracle.states;
  if (!oracle.ok()) {
    rec.skipped = true;
    rec.reason = oracle.status == baselines::FullSearchStatus::kBudgetExceeded
                     ? "oracle budget exceeded"
                     : "no feasible trajectory";
    return rec;
  }
  rec.oracle_cost = oracle.cost;

  search::SearchResult rbk;
  rec.rbk_seconds = time_per_call([&] { rbk = search::rbk_search(query); }, 0.005);
  rec.rbk_ok = rbk.ok();
  rec.rbk_cost = rbk.cost;

  std::vector<env::Cell> path;
  rec.astar_seconds =
      time_per_call([&] { path = baselines::astar_shortest_path(graph, start_cell, goal_cell); },
                    0.002);
  rec.astar_found = !path.empty();
  if (rec.astar_found) {
    const auto param = baselines::parameterize_path_as_bspline(path, *world, init, query.goal,
                                                                *tables, query.time_weight);
    rec.astar_cost = param.cost;
    rec.astar_feasible = param.feasible();
    rec.astar_infeasible_spans = static_cast<int>(param.infeasible_spans.size());
  }
  return rec;
}

CompareReport monte_carlo_compare(const CompareConfig& config) {
  CompareReport report;
  auto& s = report.summary;
  double oracle_t = 0.0, rbk_t = 0.0, astar_t = 0.0, ratio_sum = 0.0;
  int rbk_count = 0;
  for (int t = 0; t < config.trials; ++t) {
    TrialRecord rec = run_trial(config, t);
    if (rec.skipped) {
      ++s.skipped;
      report.trials.push_back(rec);
      continue;
    }
    ++s.completed;
    oracle_t += rec.oracle_seconds;
    rbk_t += rec.rbk_seconds;
    astar_t += rec.astar_seconds;
    if (rec.moving_start) ++s.moving_starts;
    if (rec.astar_found && rec.astar_feasible) ++s.astar_feasible;
    if (rec.astar_found && !rec.astar_feasible && rec.moving_start) ++s.astar_infeasible_moving;
    if (!rec.rbk_ok) {
      ++s.rbk_failures;
    } else {
      const double ratio = rec.rbk_ratio();
      ratio_sum += ratio;
      ++rbk_count;
      s.max_rbk_ratio = std::max(s.max_rbk_ratio, ratio);
      if (ratio < 1.0 - 1e-9) ++s.oracle_dominance_violations;
      if (std::abs(ratio - 1.0) <= 1e-9) ++s.rbk_optimal;
      if (rec.astar_found && rec.astar_feasible && rec.rbk_cost > rec.astar_cost * (1.0 + 1e-9)) {
        ++s.rbk_worse_than_feasible_astar;
      }
    }
    report.trials.push_back(rec);
  }
  if (s.completed > 0) {
    s.mean_oracle_seconds = oracle_t / s.completed;
    s.mean_rbk_seconds = rbk_t / s.completed;
    s.mean_astar_seconds = astar_t / s.completed;
    s.speedup = s.mean_rbk_seconds > 0.0 ? s.mean_oracle_seconds / s.mean_rbk_seconds : 0.0;
  }
  if (rbk_count > 0) s.mean_rbk_ratio = ratio_sum / rbk_count;
  return report;
}

void write_compare_csv(std::ostream& out, const CompareReport& report) {
  out << "# monte-carlo comparison; costs are control cost + time weight * duration, times in s\n";
  out << "trial,status,moving_start,time_weight,oracle_cost,oracle_s,oracle_states,rbk_ok,rbk_cost,"
         "rbk_s,rbk_ratio,astar_found,astar_feasible,astar_infeasible_spans,astar_cost,astar_s,"
         "astar_ratio\n";
  for (const auto& r : report.trials) {
    out << r.trial << ',' << (r.skipped ? "skipped:" + r.reason : std::string("ok")) << ','
        << r.moving_start << ',' << fmt(r.time_weight) << ',';
    if (r.skipped) {
      out << ",,,,,,,,,,,,\n";
      continue;
    }
    out << fmt(r.oracle_cost) << ',' << fmt(r.oracle_seconds) << ',' << r.oracle_states << ','
        << r.rbk_ok << ',' << fmt(r.rbk_cost) << ',' << fmt(r.rbk_seconds) << ','
        << (r.rbk_ok ? fmt(r.rbk_ratio()) : "") << ',' << r.astar_found << ','
        << r.astar_feasible << ',' << r.astar_infeasible_spans << ',' << fmt(r.astar_cost) << ','
        << fmt(r.astar_seconds) << ',' << (r.astar_found ? fmt(r.astar_ratio()) : "") << '\n';
  }
  const auto& s = report.summary;
  out << "# summary\n";
  out << "# completed," << s.completed << "\n# skipped," << s.skipped << "\n# rbk_failures,"
      << s.rbk_failures << "\n# rbk_optimal," << s.rbk_optimal << "\n# mean_rbk_ratio,"
      << fmt(s.mean_rbk_ratio) << "\n# max_rbk_ratio," << fmt(s.max_rbk_ratio)
      << "\n# oracle_dominance_violations," << s.oracle_dominance_violations
      << "\n# rbk_worse_than_feasible_astar," << s.rbk_worse_than_feasible_astar
      << "\n# astar_feasible," << s.astar_feasible << "\n# astar_infeasible_moving,"
      << s.astar_infeasible_moving << "\n# moving_starts," << s.moving_starts
      << "\n# mean_oracle_s," << fmt(s.mean_oracle_seconds) << "\n# mean_rbk_s,"
      << fmt(s.mean_rbk_seconds) << "\n# mean_astar_s," << fmt(s.mean_astar_seconds)
      << "\n# speedup," << fmt(s.speedup) << '\n';
}

}  // namespace rbk::bench
