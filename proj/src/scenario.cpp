#include "rbk/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "rbk/elastic.hpp"

namespace rbk::bench {

ScenarioError::ScenarioError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "scenario line " + std::to_string(line) + ": " + message
                                  : "scenario: " + message),
      line_(line) {}

namespace {

int line_of(const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  return mark.line >= 0 ? mark.line + 1 : 0;
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  throw ScenarioError(line_of(node), message);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

Vec3 vec3(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence() || node.size() != 3) fail(node, "'" + key + "' must be [x, y, z]");
  return Vec3(scalar<double>(node[0], key), scalar<double>(node[1], key),
              scalar<double>(node[2], key));
}

// Iterates a mapping, rejecting keys outside `allowed`.
template <typename Fn>
void for_each_key(const YAML::Node& node, const std::string& section,
                  const std::set<std::string>& allowed, Fn&& fn) {
  if (!node.IsMap()) fail(node, "'" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + section + "." + key + "'");
    fn(key, kv.second);
  }
}

void parse_map(const YAML::Node& node, MapSpec& map) {
  bool origin_given = false;
  for_each_key(node, "map",
               {"kind", "seed", "resolution", "dims", "origin", "density", "radius_min",
                "radius_max", "height", "threshold", "feature_size", "octaves", "keepout_radius",
                "path"},
               [&](const std::string& key, const YAML::Node& v) {
                 if (key == "kind") {
                   const auto kind = scalar<std::string>(v, key);
                   if (kind == "empty") {
                     map.kind = MapKind::kEmpty;
                   } else if (kind == "pillars") {
                     map.kind = MapKind::kPillars;
                   } else if (kind == "noise") {
                     map.kind = MapKind::kNoise;
                   } else if (kind == "file") {
                     map.kind = MapKind::kFile;
                   } else {
                     fail(v, "map.kind must be empty, pillars, noise or file");
                   }
                 } else if (key == "seed") {
                   map.seed = scalar<std::uint64_t>(v, key);
                 } else if (key == "resolution") {
                   map.grid.resolution = scalar<double>(v, key);
                 } else if (key == "dims") {
                   const Vec3 d = vec3(v, key);
                   map.grid.dims = d.array().round().cast<int>().matrix();
                 } else if (key == "origin") {
                   map.grid.origin = vec3(v, key);
                   origin_given = true;
                 } else if (key == "density") {
                   map.density = scalar<double>(v, key);
                 } else if (key == "radius_min") {
                   map.radius_min = scalar<double>(v, key);
                 } else if (key == "radius_max") {
                   map.radius_max = scalar<double>(v, key);
                 } else if (key == "height") {
                   map.height = scalar<double>(v, key);
                 } else if (key == "threshold") {
                   map.threshold = scalar<double>(v, key);
                 } else if (key == "feature_size") {
                   map.feature_size = scalar<double>(v, key);
                 } else if (key == "octaves") {
                   map.octaves = scalar<int>(v, key);
                 } else if (key == "keepout_radius") {
                   map.keepout_radius = scalar<double>(v, key);
                 } else if (key == "path") {
                   map.path = scalar<std::string>(v, key);
                 }
               });
  if (!origin_given) map.grid.origin = Vec3::Constant(0.5 * map.grid.resolution);
}

void parse_spline(const YAML::Node& node, bspline::UniformBsplineSpec& spline) {
  for_each_key(node, "spline",
               {"k", "dt", "weights", "velocity_bound", "acceleration_bound", "jerk_bound"},
               [&](const std::string& key, const YAML::Node& v) {
                 if (key == "k") {
                   spline.k = scalar<int>(v, key);
                 } else if (key == "dt") {
                   spline.dt = scalar<double>(v, key);
                 } else if (key == "weights") {
                   if (!v.IsSequence()) fail(v, "spline.weights must be a list");
                   spline.weights.clear();
                   for (const auto& w : v) spline.weights.push_back(scalar<double>(w, key));
                 } else {
                   const int order = key == "velocity_bound" ? 1 : key == "acceleration_bound" ? 2 : 3;
                   if (v.IsNull()) {
                     spline.bounds.erase(order);
                   } else {
                     spline.bounds[order] = vec3(v, key);
                   }
                 }
               });
}

void parse_planner(const YAML::Node& node, replan::ReplanConfig& planner) {
  for_each_key(node, "planner",
               {"window", "sensing_range", "mode", "timer_knots", "time_weight", "v_max",
                "connectivity", "expansion_budget", "target_update_distance", "optimize",
                "samples_per_span", "safety_rounds"},
               [&](const std::string& key, const YAML::Node& v) {
                 if (key == "window") {
                   planner.window = scalar<int>(v, key);
                 } else if (key == "sensing_range") {
                   planner.sensing_range = scalar<double>(v, key);
                 } else if (key == "mode") {
                   const auto mode = scalar<std::string>(v, key);
                   if (mode == "passive") {
                     planner.mode = replan::Mode::kPassive;
                   } else if (mode == "active") {
                     planner.mode = replan::Mode::kActive;
                   } else {
                     fail(v, "planner.mode must be passive or active");
                   }
                 } else if (key == "timer_knots") {
                   planner.timer_knots = scalar<int>(v, key);
                 } else if (key == "time_weight") {
                   if (v.IsScalar() && v.Scalar() == "auto") {
                     planner.time_weight = 0.0;
                   } else {
                     planner.time_weight = scalar<double>(v, key);
                     if (!(planner.time_weight > 0.0)) {
                       fail(v, "planner.time_weight must be 'auto' or > 0");
                     }
                   }
                 } else if (key == "v_max") {
                   planner.v_max = scalar<double>(v, key);
                 } else if (key == "connectivity") {
                   planner.connectivity = scalar<int>(v, key);
                 } else if (key == "expansion_budget") {
                   planner.expansion_budget = scalar<std::size_t>(v, key);
                 } else if (key == "target_update_distance") {
                   planner.target_update_distance = scalar<double>(v, key);
                 } else if (key == "optimize") {
                   planner.optimize = scalar<bool>(v, key);
                 } else if (key == "samples_per_span") {
                   planner.samples_per_span = scalar<int>(v, key);
                 } else if (key == "safety_rounds") {
                   planner.safety_rounds = scalar<int>(v, key);
                 }
               });
}

void parse_mission(const YAML::Node& node, Scenario& s) {
  for_each_key(node, "mission", {"start", "goals", "sim_step", "max_time", "sample_step"},
               [&](const std::string& key, const YAML::Node& v) {
                 if (key == "start") {
                   s.start = vec3(v, key);
                 } else if (key == "goals") {
                   if (!v.IsSequence() || v.size() == 0) fail(v, "mission.goals must be a list");
                   s.goals.clear();
                   for (const auto& g : v) s.goals.push_back(vec3(g, key));
                 } else if (key == "sim_step") {
                   s.sim_step = scalar<double>(v, key);
                 } else if (key == "max_time") {
                   s.max_time = scalar<double>(v, key);
                 } else if (key == "sample_step") {
                   s.sample_step = scalar<double>(v, key);
                 }
               });
}

void parse_insertions(const YAML::Node& node, Scenario& s) {
  if (!node.IsSequence()) fail(node, "'insertions' must be a list");
  for (const auto& item : node) {
    ObstacleInsertion ins;
    bool has_min = false, has_max = false;
    for_each_key(item, "insertions[]", {"time", "min", "max"},
                 [&](const std::string& key, const YAML::Node& v) {
                   if (key == "time") {
                     ins.time = scalar<double>(v, key);
                   } else if (key == "min") {
                     ins.min = vec3(v, key);
                     has_min = true;
                   } else {
                     ins.max = vec3(v, key);
                     has_max = true;
                   }
                 });
    if (!has_min || !has_max) fail(item, "insertion needs both 'min' and 'max'");
    if ((ins.max.array() < ins.min.array()).any()) fail(item, "insertion box has max < min");
    s.insertions.push_back(ins);
  }
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioError(0, "override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ScenarioError(0, "override '" + assignment + "': " + e.msg);
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cur[parts[i]];
    if (!next.IsDefined() || next.IsNull()) {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = cur[parts[i]];
    }
    if (!next.IsMap()) throw ScenarioError(0, "override '" + path + "': '" + parts[i] + "' is not a section");
    cur.reset(next);
  }
  cur[parts.back()] = value;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) throw ScenarioError(1, "scenario must be a mapping");
  for (const auto& o : overrides) apply_override(root, o);

  Scenario s;
  if (!root["version"]) throw ScenarioError(1, "missing 'version' header");
  for_each_key(root, "scenario",
               {"version", "name", "map", "spline", "planner", "clearances", "mission",
                "insertions"},
               [&](const std::string& key, const YAML::Node& v) {
                 if (key == "version") {
                   s.version = scalar<int>(v, key);
                   if (s.version != 1) fail(v, "unsupported scenario version");
                 } else if (key == "name") {
                   s.name = scalar<std::string>(v, key);
                 } else if (key == "map") {
                   parse_map(v, s.map);
                 } else if (key == "spline") {
                   parse_spline(v, s.spline);
                 } else if (key == "planner") {
                   parse_planner(v, s.planner);
                 } else if (key == "clearances") {
                   for_each_key(v, "clearances", {"rbk", "elas", "robot_radius"},
                                [&](const std::string& ck, const YAML::Node& cv) {
                                  const double value = scalar<double>(cv, ck);
                                  if (ck == "rbk") s.clearances.rbk = value;
                                  if (ck == "elas") s.clearances.elas = value;
                                  if (ck == "robot_radius") s.clearances.robot_radius = value;
                                });
                 } else if (key == "mission") {
                   parse_mission(v, s);
                 } else if (key == "insertions") {
                   parse_insertions(v, s);
                 }
               });
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(0, "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), overrides);
}

void validate_scenario(const Scenario& s) {
  try {
    s.spline.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(0, std::string("spline: ") + e.what());
  }
  const auto& c = s.clearances;
  if (!(c.robot_radius >= 0.0 && c.elas > c.robot_radius && c.rbk > c.elas)) {
    throw ScenarioError(0, "clearances must satisfy rbk > elas > robot_radius >= 0");
  }
  if (!(s.map.grid.resolution > 0.0) || (s.map.grid.dims.array() <= 0).any()) {
    throw ScenarioError(0, "map needs a positive resolution and dims");
  }
  const auto check = elastic::check_two_level_inflation(
      s.map.grid.resolution, s.planner.connectivity, c.rbk, c.elas, c.robot_radius);
  if (!check.ok) {
    std::ostringstream msg;
    msg << "clearances fail the two-level inflation condition (connectivity margin "
        << check.connectivity_margin << ", polyline margin " << check.polyline_margin << ")";
    throw ScenarioError(0, msg.str());
  }
  if (s.planner.window < 2) throw ScenarioError(0, "planner.window must be >= 2");
  if (!(s.planner.sensing_range > 0.0)) throw ScenarioError(0, "planner.sensing_range must be > 0");
  if (!(s.sim_step > 0.0) || !(s.max_time > 0.0) || !(s.sample_step > 0.0)) {
    throw ScenarioError(0, "mission.sim_step, max_time and sample_step must be > 0");
  }
  if (s.goals.empty()) throw ScenarioError(0, "mission needs at least one goal");
  if (s.map.kind == MapKind::kFile && s.map.path.empty()) {
    throw ScenarioError(0, "map.kind file needs map.path");
  }
}

env::WorldPtr build_world(const Scenario& s) {
  validate_scenario(s);
  env::PointList keepout = s.goals;
  keepout.push_back(s.start);
  env::PointList obstacles;
  env::GridSpec grid = s.map.grid;
  switch (s.map.kind) {
    case MapKind::kEmpty:
      break;
    case MapKind::kPillars: {
      env::PillarMapParams p;
      p.area_min = grid.lower_corner().head<2>();
      p.area_max = grid.upper_corner().head<2>();
      p.z_min = grid.lower_corner().z();
      p.z_max = std::min(s.map.height, grid.upper_corner().z());
      p.density = s.map.density;
      p.radius_min = s.map.radius_min;
      p.radius_max = s.map.radius_max;
      p.resolution = grid.resolution;
      p.keepout = keepout;
      p.keepout_radius = s.map.keepout_radius;
      obstacles = env::generate_random_pillars(s.map.seed, p);
      break;
    }
    case MapKind::kNoise: {
      env::NoiseMapParams p;
      p.grid = grid;
      p.threshold = s.map.threshold;
      p.feature_size = s.map.feature_size;
      p.octaves = s.map.octaves;
      p.keepout = keepout;
      p.keepout_radius = s.map.keepout_radius;
      obstacles = env::generate_noise_map(s.map.seed, p);
      break;
    }
    case MapKind::kFile: {
      std::ifstream in(s.map.path);
      if (!in) throw ScenarioError(0, "cannot open map file '" + s.map.path + "'");
      auto world = env::OccupancyWorld::read(in, s.clearances);
      obstacles = world->obstacles();
      grid = world->grid();
      break;
    }
  }
  auto world = env::OccupancyWorld::build(std::move(obstacles), grid, s.clearances);
  auto require_free = [&](const Vec3& p, const std::string& what) {
    const env::Cell cell = world->cell_of(p);
    if (!world->in_bounds(cell)) throw ScenarioError(0, what + " lies outside the map");
    if (!world->free(cell, env::ClearanceLevel::kRbk)) {
      throw ScenarioError(0, what + " is not free at the search clearance");
    }
  };
  require_free(s.start, "start");
  for (std::size_t i = 0; i < s.goals.size(); ++i) require_free(s.goals[i], "goal " + std::to_string(i));
  return world;
}

std::string to_yaml(const Scenario& s) {
  auto seq = [](YAML::Emitter& out, const Vec3& v) {
    out << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq;
  };
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << s.version;
  out << YAML::Key << "name" << YAML::Value << s.name;

  out << YAML::Key << "map" << YAML::Value << YAML::BeginMap;
  const char* kinds[] = {"empty", "pillars", "noise", "file"};
  out << YAML::Key << "kind" << YAML::Value << kinds[static_cast<int>(s.map.kind)];
  out << YAML::Key << "seed" << YAML::Value << s.map.seed;
  out << YAML::Key << "resolution" << YAML::Value << s.map.grid.resolution;
  out << YAML::Key << "dims" << YAML::Value;
  seq(out, s.map.grid.dims.cast<double>());
  out << YAML::Key << "origin" << YAML::Value;
  seq(out, s.map.grid.origin);
  out << YAML::Key << "density" << YAML::Value << s.map.density;
  out << YAML::Key << "radius_min" << YAML::Value << s.map.radius_min;
  out << YAML::Key << "radius_max" << YAML::Value << s.map.radius_max;
  out << YAML::Key << "height" << YAML::Value << s.map.height;
  out << YAML::Key << "threshold" << YAML::Value << s.map.threshold;
  out << YAML::Key << "feature_size" << YAML::Value << s.map.feature_size;
  out << YAML::Key << "octaves" << YAML::Value << s.map.octaves;
  out << YAML::Key << "keepout_radius" << YAML::Value << s.map.keepout_radius;
  if (!s.map.path.empty()) out << YAML::Key << "path" << YAML::Value << s.map.path;
  out << YAML::EndMap;

  out << YAML::Key << "spline" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "k" << YAML::Value << s.spline.k;
  out << YAML::Key << "dt" << YAML::Value << s.spline.dt;
  out << YAML::Key << "weights" << YAML::Value << YAML::Flow << s.spline.weights;
  const char* names[] = {"", "velocity_bound", "acceleration_bound", "jerk_bound"};
  for (const auto& [order, bound] : s.spline.bounds) {
    if (order < 1 || order > 3) continue;
    out << YAML::Key << names[order] << YAML::Value;
    seq(out, bound);
  }
  out << YAML::EndMap;

  const auto& p = s.planner;
  out << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "window" << YAML::Value << p.window;
  out << YAML::Key << "sensing_range" << YAML::Value << p.sensing_range;
  out << YAML::Key << "mode" << YAML::Value << replan::to_string(p.mode);
  out << YAML::Key << "timer_knots" << YAML::Value << p.timer_knots;
  out << YAML::Key << "time_weight" << YAML::Value;
  if (p.time_weight > 0.0) {
    out << p.time_weight;
  } else {
    out << "auto";
  }
  out << YAML::Key << "v_max" << YAML::Value << p.v_max;
  out << YAML::Key << "connectivity" << YAML::Value << p.connectivity;
  out << YAML::Key << "expansion_budget" << YAML::Value << p.expansion_budget;
  out << YAML::Key << "target_update_distance" << YAML::Value << p.target_update_distance;
  out << YAML::Key << "optimize" << YAML::Value << p.optimize;
  out << YAML::Key << "samples_per_span" << YAML::Value << p.samples_per_span;
  out << YAML::Key << "safety_rounds" << YAML::Value << p.safety_rounds;
  out << YAML::EndMap;

  out << YAML::Key << "clearances" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "rbk" << YAML::Value << s.clearances.rbk;
  out << YAML::Key << "elas" << YAML::Value << s.clearances.elas;
  out << YAML::Key << "robot_radius" << YAML::Value << s.clearances.robot_radius;
  out << YAML::EndMap;

  out << YAML::Key << "mission" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "start" << YAML::Value;
  seq(out, s.start);
  out << YAML::Key << "goals" << YAML::Value << YAML::BeginSeq;
  for (const auto& g : s.goals) seq(out, g);
  out << YAML::EndSeq;
  out << YAML::Key << "sim_step" << YAML::Value << s.sim_step;
  out << YAML::Key << "max_time" << YAML::Value << s.max_time;
  out << YAML::Key << "sample_step" << YAML::Value << s.sample_step;
  out << YAML::EndMap;

  if (!s.insertions.empty()) {
    out << YAML::Key << "insertions" << YAML::Value << YAML::BeginSeq;
    for (const auto& ins : s.insertions) {
      out << YAML::BeginMap;
      out << YAML::Key << "time" << YAML::Value << ins.time;
      out << YAML::Key << "min" << YAML::Value;
      seq(out, ins.min);
      out << YAML::Key << "max" << YAML::Value;
      seq(out, ins.max);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace rbk::bench
