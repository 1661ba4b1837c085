#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbk/bspline.hpp"
#include "rbk/env.hpp"
#include "rbk/replanner.hpp"

namespace rbk::bench {

using bspline::Vec3;

enum class MapKind { kEmpty, kPillars, kNoise, kFile };

struct MapSpec {
  MapKind kind = MapKind::kPillars;
  std::uint64_t seed = 1;
  env::GridSpec grid;
  // pillars
  double density = 0.25;
  double radius_min = 0.1;
  double radius_max = 0.25;
  double height = 3.0;
  // noise
  double threshold = 0.6;
  double feature_size = 2.0;
  int octaves = 2;
  // Obstacle-free ball around the start and every goal.
  double keepout_radius = 1.0;
  std::string path;  // kFile
};

// A box of obstacle points that appears at `time`.
struct ObstacleInsertion {
  double time = 0.0;
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct Scenario {
  int version = 1;
  std::string name = "scenario";
  MapSpec map;
  bspline::UniformBsplineSpec spline;
  replan::ReplanConfig planner;
  env::Clearances clearances;
  Vec3 start = Vec3(1.0, 1.0, 1.0);
  std::vector<Vec3> goals = {Vec3(9.0, 9.0, 1.0), Vec3(1.0, 1.0, 1.0)};
  double sim_step = 0.1;
  double max_time = 300.0;
  double sample_step = 0.02;  // trajectory export
  std::vector<ObstacleInsertion> insertions;
};

// Parse or validation failure; `line` is 1-based, 0 when unknown.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

// `overrides` are "dotted.key=value" assignments applied before parsing;
// the value is read as YAML.
Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {});
Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

// Structural checks that need no map: bounds, clearance ordering, the
// two-level inflation condition.
void validate_scenario(const Scenario& scenario);

// Builds the map and checks that start and goals are free at the search
// clearance.
env::WorldPtr build_world(const Scenario& scenario);

std::string to_yaml(const Scenario& scenario);

}  // namespace rbk::bench
