#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

namespace rbk::env {

using Vec3 = Eigen::Vector3d;
using Cell = Eigen::Vector3i;
using PointList = std::vector<Vec3>;

struct GridSpec {
  double resolution = 1.0 / 6.0;
  Eigen::Vector3i dims = Eigen::Vector3i(60, 60, 20);
  // World coordinates of the center of cell (0, 0, 0).
  Vec3 origin = Vec3::Constant(1.0 / 12.0);

  int cell_count() const { return dims.x() * dims.y() * dims.z(); }
  Vec3 upper_corner() const;  // far face of the last cell
  Vec3 lower_corner() const;
};

struct Clearances {
  double rbk = 0.45;
  double elas = 0.25;
  double robot_radius = 0.15;
};

enum class ClearanceLevel { kRaw, kElas, kRbk };

struct NearestObstacle {
  Vec3 point = Vec3::Zero();
  double distance = std::numeric_limits<double>::infinity();
  bool found() const { return distance < std::numeric_limits<double>::infinity(); }
};

// Exact nearest-point queries over a static point set, bucketed on a
// uniform grid.
class NearestObstacleIndex {
 public:
  NearestObstacleIndex() = default;
  NearestObstacleIndex(const PointList& points, double bucket_size);

  NearestObstacle nearest(const Vec3& query) const;
  bool empty() const { return points_.empty(); }

 private:
  const std::vector<int>& bucket(int x, int y, int z) const;

  PointList points_;
  double bucket_size_ = 1.0;
  Vec3 lower_ = Vec3::Zero();
  Eigen::Vector3i extent_ = Eigen::Vector3i::Zero();
  std::vector<std::vector<int>> buckets_;
};

class OccupancyWorld {
 public:
  // Throws std::invalid_argument unless rbk > elas > robot_radius >= 0.
  static std::shared_ptr<const OccupancyWorld> build(PointList obstacles, const GridSpec& grid,
                                                     const Clearances& clearances);

  const GridSpec& grid() const { return grid_; }
  const Clearances& clearances() const { return clearances_; }
  const PointList& obstacles() const { return obstacles_; }

  bool in_bounds(const Cell& cell) const;
  int linear_index(const Cell& cell) const;
  Cell cell_from_index(int index) const;
  Cell cell_of(const Vec3& point) const;
  Vec3 center(const Cell& cell) const;

  // Out-of-bounds cells count as occupied.
  bool occupied(const Cell& cell, ClearanceLevel level) const;
  bool free(const Cell& cell, ClearanceLevel level) const { return !occupied(cell, level); }
  double clearance_of(ClearanceLevel level) const;

  NearestObstacle nn_search(const Vec3& point) const { return index_.nearest(point); }
  // Distance to the nearest raw obstacle point; +inf when there is none.
  double clearance(const Vec3& point) const { return index_.nearest(point).distance; }

  // Same grid and clearances, keeping only obstacles within `range` of
  // `center`.
  std::shared_ptr<const OccupancyWorld> crop(const Vec3& center, double range) const;

  // "x y z" per line after a header line; see write_map.
  void write(std::ostream& out) const;
  static std::shared_ptr<const OccupancyWorld> read(std::istream& in, const Clearances& clearances);

 private:
  OccupancyWorld() = default;

  GridSpec grid_;
  Clearances clearances_;
  PointList obstacles_;
  std::vector<std::uint8_t> raw_, elas_, rbk_;
  NearestObstacleIndex index_;
};

using WorldPtr = std::shared_ptr<const OccupancyWorld>;

// M-connect neighborhood over the free cells of one clearance level.
class GridGraph {
 public:
  GridGraph(WorldPtr world, ClearanceLevel level, int connectivity = 26);

  const OccupancyWorld& world() const { return *world_; }
  const WorldPtr& world_ptr() const { return world_; }
  const std::vector<Cell>& offsets() const { return offsets_; }
  int connectivity() const { return connectivity_; }
  ClearanceLevel level() const { return level_; }
  bool free(const Cell& cell) const { return world_->free(cell, level_); }
  // Longest neighbor step in meters.
  double max_step() const { return max_step_; }

 private:
  WorldPtr world_;
  ClearanceLevel level_;
  int connectivity_;
  std::vector<Cell> offsets_;
  double max_step_ = 0.0;
};

// Largest step of an M-connect 3-D grid: resolution * sqrt(M-connect norm).
double max_step_for(double resolution, int connectivity);

struct PillarMapParams {
  Eigen::Vector2d area_min = Eigen::Vector2d(0.0, 0.0);
  Eigen::Vector2d area_max = Eigen::Vector2d(10.0, 10.0);
  double z_min = 0.0;
  double z_max = 3.0;
  double density = 0.25;  // pillars per square meter
  double radius_min = 0.1;
  double radius_max = 0.25;
  double resolution = 1.0 / 6.0;
  // Pillar axes are kept at least `keepout_radius` away from these points.
  PointList keepout;
  double keepout_radius = 0.0;
};

int pillar_count(const PillarMapParams& params);
PointList generate_random_pillars(std::uint64_t seed, const PillarMapParams& params);

struct NoiseMapParams {
  GridSpec grid;
  double threshold = 0.6;
  double feature_size = 2.0;  // meters per noise lattice period
  int octaves = 2;
  PointList keepout;
  double keepout_radius = 0.0;
};

// Value in (0, 1) of a seeded smooth gradient-noise field.
class GradientNoise3 {
 public:
  explicit GradientNoise3(std::uint64_t seed);
  double sample(const Vec3& p) const;  // roughly in [-1, 1]

 private:
  std::vector<int> perm_;
};

PointList generate_noise_map(std::uint64_t seed, const NoiseMapParams& params);

}  // namespace rbk::env
