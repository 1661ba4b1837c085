#include "rbk/env.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rbk::env {

Vec3 GridSpec::lower_corner() const { return origin - Vec3::Constant(0.5 * resolution); }

Vec3 GridSpec::upper_corner() const {
  return origin + (dims.cast<double>() - Vec3::Constant(0.5)) * resolution;
}

// --- nearest obstacle index -------------------------------------------------

NearestObstacleIndex::NearestObstacleIndex(const PointList& points, double bucket_size)
    : points_(points), bucket_size_(bucket_size) {
  if (points_.empty()) return;
  Vec3 lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lower_ = lo;
  for (int a = 0; a < 3; ++a) {
    extent_(a) = static_cast<int>(std::floor((hi(a) - lo(a)) / bucket_size_)) + 1;
  }
  buckets_.resize(static_cast<std::size_t>(extent_.x()) * extent_.y() * extent_.z());
  for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
    const Vec3 rel = (points_[i] - lower_) / bucket_size_;
    const int x = std::min(static_cast<int>(rel.x()), extent_.x() - 1);
    const int y = std::min(static_cast<int>(rel.y()), extent_.y() - 1);
    const int z = std::min(static_cast<int>(rel.z()), extent_.z() - 1);
    buckets_[(static_cast<std::size_t>(z) * extent_.y() + y) * extent_.x() + x].push_back(i);
  }
}

const std::vector<int>& NearestObstacleIndex::bucket(int x, int y, int z) const {
  return buckets_[(static_cast<std::size_t>(z) * extent_.y() + y) * extent_.x() + x];
}

NearestObstacle NearestObstacleIndex::nearest(const Vec3& query) const {
  NearestObstacle best;
  if (points_.empty()) return best;
  Eigen::Vector3i qb;
  for (int a = 0; a < 3; ++a) {
    qb(a) = static_cast<int>(std::floor((query(a) - lower_(a)) / bucket_size_));
  }
  // Chebyshev distance from the query bucket to the bucket box.
  int start = 0;
  int stop = 0;
  for (int a = 0; a < 3; ++a) {
    start = std::max(start, std::max(-qb(a), qb(a) - (extent_(a) - 1)));
    stop = std::max(stop, std::max(qb(a), extent_(a) - 1 - qb(a)));
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_index = -1;
  auto visit = [&](int x, int y, int z) {
    for (int i : bucket(x, y, z)) {
      const double d2 = (points_[i] - query).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && i < best_index)) {
        best_d2 = d2;
        best_index = i;
      }
    }
  };
  for (int r = start; r <= stop; ++r) {
    // Any point in ring r is at least (r - 1) buckets away.
    const double ring_min = (r - 1) * bucket_size_;
    if (best_index >= 0 && ring_min > 0.0 && ring_min * ring_min > best_d2) break;
    const int x0 = std::max(qb.x() - r, 0), x1 = std::min(qb.x() + r, extent_.x() - 1);
    const int y0 = std::max(qb.y() - r, 0), y1 = std::min(qb.y() + r, extent_.y() - 1);
    const int z0 = std::max(qb.z() - r, 0), z1 = std::min(qb.z() + r, extent_.z() - 1);
    for (int x = x0; x <= x1; ++x) {
      for (int y = y0; y <= y1; ++y) {
        const bool on_face = std::abs(x - qb.x()) == r || std::abs(y - qb.y()) == r;
        if (on_face) {
          for (int z = z0; z <= z1; ++z) visit(x, y, z);
        } else {
          if (qb.z() - r >= 0 && qb.z() - r <= extent_.z() - 1) visit(x, y, qb.z() - r);
          if (r > 0 && qb.z() + r >= 0 && qb.z() + r <= extent_.z() - 1) visit(x, y, qb.z() + r);
        }
      }
    }
  }
  best.point = points_[best_index];
  best.distance = std::sqrt(best_d2);
  return best;
}

// --- occupancy world ----------------------------------------------------------

namespace {

void inflate(const GridSpec& grid, const PointList& obstacles, double clearance,
             std::vector<std::uint8_t>& cells) {
  const double res = grid.resolution;
  const int reach = static_cast<int>(std::ceil(clearance / res)) + 1;
  const double c2 = clearance * clearance;
  for (const auto& p : obstacles) {
    const Vec3 rel = (p - grid.origin) / res;
    const Eigen::Vector3i base(static_cast<int>(std::lround(rel.x())),
                               static_cast<int>(std::lround(rel.y())),
                               static_cast<int>(std::lround(rel.z())));
    for (int dz = -reach; dz <= reach; ++dz) {
      const int z = base.z() + dz;
      if (z < 0 || z >= grid.dims.z()) continue;
      for (int dy = -reach; dy <= reach; ++dy) {
        const int y = base.y() + dy;
        if (y < 0 || y >= grid.dims.y()) continue;
        for (int dx = -reach; dx <= reach; ++dx) {
          const int x = base.x() + dx;
          if (x < 0 || x >= grid.dims.x()) continue;
          const Vec3 c = grid.origin + Vec3(x, y, z) * res;
          if ((c - p).squaredNorm() <= c2) {
            cells[(static_cast<std::size_t>(z) * grid.dims.y() + y) * grid.dims.x() + x] = 1;
          }
        }
      }
    }
  }
}

}  // namespace

std::shared_ptr<const OccupancyWorld> OccupancyWorld::build(PointList obstacles,
                                                            const GridSpec& grid,
                                                            const Clearances& clearances) {
  if (!(clearances.robot_radius >= 0.0 && clearances.elas > clearances.robot_radius &&
        clearances.rbk > clearances.elas)) {
    throw std::invalid_argument("clearances must satisfy rbk > elas > robot_radius >= 0");
  }
  if (!(grid.resolution > 0.0) || (grid.dims.array() <= 0).any()) {
    throw std::invalid_argument("grid needs positive resolution and dims");
  }
  auto world = std::shared_ptr<OccupancyWorld>(new OccupancyWorld());
  world->grid_ = grid;
  world->clearances_ = clearances;
  world->obstacles_ = std::move(obstacles);
  const auto n = static_cast<std::size_t>(grid.cell_count());
  world->raw_.assign(n, 0);
  for (const auto& p : world->obstacles_) {
    const Cell c = world->cell_of(p);
    if (world->in_bounds(c)) world->raw_[world->linear_index(c)] = 1;
  }
  world->elas_ = world->raw_;
  world->rbk_ = world->raw_;
  inflate(grid, world->obstacles_, clearances.elas, world->elas_);
  inflate(grid, world->obstacles_, clearances.rbk, world->rbk_);
  for (std::size_t i = 0; i < n; ++i) world->rbk_[i] |= world->elas_[i];
  world->index_ = NearestObstacleIndex(world->obstacles_, std::max(0.5, 3.0 * grid.resolution));
  return world;
}

bool OccupancyWorld::in_bounds(const Cell& c) const {
  return (c.array() >= 0).all() && (c.array() < grid_.dims.array()).all();
}

int OccupancyWorld::linear_index(const Cell& c) const {
  return (c.z() * grid_.dims.y() + c.y()) * grid_.dims.x() + c.x();
}

Cell OccupancyWorld::cell_from_index(int index) const {
  const int x = index % grid_.dims.x();
  const int y = (index / grid_.dims.x()) % grid_.dims.y();
  const int z = index / (grid_.dims.x() * grid_.dims.y());
  return {x, y, z};
}

Cell OccupancyWorld::cell_of(const Vec3& p) const {
  const Vec3 rel = (p - grid_.origin) / grid_.resolution;
  return {static_cast<int>(std::lround(rel.x())), static_cast<int>(std::lround(rel.y())),
          static_cast<int>(std::lround(rel.z()))};
}

Vec3 OccupancyWorld::center(const Cell& c) const {
  return grid_.origin + c.cast<double>() * grid_.resolution;
}

bool OccupancyWorld::occupied(const Cell& c, ClearanceLevel level) const {
  if (!in_bounds(c)) return true;
  const int i = linear_index(c);
  switch (level) {
    case ClearanceLevel::kRaw:
      return raw_[i] != 0;
    case ClearanceLevel::kElas:
      return elas_[i] != 0;
    case ClearanceLevel::kRbk:
      return rbk_[i] != 0;
  }
  return true;
}

double OccupancyWorld::clearance_of(ClearanceLevel level) const {
  switch (level) {
    case ClearanceLevel::kRaw:
      return 0.0;
    case ClearanceLevel::kElas:
      return clearances_.elas;
    case ClearanceLevel::kRbk:
      return clearances_.rbk;
  }
  return 0.0;
}

std::shared_ptr<const OccupancyWorld> OccupancyWorld::crop(const Vec3& c, double range) const {
  PointList kept;
  const double r2 = range * range;
  for (const auto& p : obstacles_) {
    if ((p - c).squaredNorm() <= r2) kept.push_back(p);
  }
  return build(std::move(kept), grid_, clearances_);
}

void OccupancyWorld::write(std::ostream& out) const {
  out << std::setprecision(17);
  out << "# obstacle-map v1 resolution " << grid_.resolution << " dims " << grid_.dims.x() << ' '
      << grid_.dims.y() << ' ' << grid_.dims.z() << " origin " << grid_.origin.x() << ' '
      << grid_.origin.y() << ' ' << grid_.origin.z() << '\n';
  for (const auto& p : obstacles_) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

std::shared_ptr<const OccupancyWorld> OccupancyWorld::read(std::istream& in,
                                                           const Clearances& clearances) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("map: missing header line");
  std::istringstream header(line);
  std::string hash, tag, key;
  GridSpec grid;
  header >> hash >> tag;
  if (hash != "#" || tag != "obstacle-map") throw std::runtime_error("map: bad header");
  std::string version;
  header >> version;
  while (header >> key) {
    if (key == "resolution") {
      header >> grid.resolution;
    } else if (key == "dims") {
      header >> grid.dims.x() >> grid.dims.y() >> grid.dims.z();
    } else if (key == "origin") {
      header >> grid.origin.x() >> grid.origin.y() >> grid.origin.z();
    } else {
      throw std::runtime_error("map: unknown header key '" + key + "'");
    }
  }
  PointList points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Vec3 p;
    if (!(row >> p.x() >> p.y() >> p.z())) {
      throw std::runtime_error("map: malformed point on line " + std::to_string(line_no));
    }
    points.push_back(p);
  }
  return build(std::move(points), grid, clearances);
}

// --- grid graph -------------------------------------------------------------

double max_step_for(double resolution, int connectivity) {
  switch (connectivity) {
    case 6:
      return resolution;
    case 18:
      return resolution * std::sqrt(2.0);
    case 26:
      return resolution * std::sqrt(3.0);
    default:
      throw std::invalid_argument("connectivity must be 6, 18 or 26");
  }
}

GridGraph::GridGraph(WorldPtr world, ClearanceLevel level, int connectivity)
    : world_(std::move(world)), level_(level), connectivity_(connectivity) {
  const int max_norm1 = connectivity == 6 ? 1 : connectivity == 18 ? 2 : connectivity == 26 ? 3 : 0;
  if (max_norm1 == 0) throw std::invalid_argument("connectivity must be 6, 18 or 26");
  const bool flat = world_->grid().dims.z() == 1;
  for (int dz = -1; dz <= 1; ++dz) {
    if (flat && dz != 0) continue;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int n1 = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (n1 == 0 || n1 > max_norm1) continue;
        offsets_.emplace_back(dx, dy, dz);
        max_step_ = std::max(max_step_, world_->grid().resolution * std::sqrt(double(n1)));
      }
    }
  }
}

// --- generators -------------------------------------------------------------

int pillar_count(const PillarMapParams& params) {
  const Eigen::Vector2d span = params.area_max - params.area_min;
  return static_cast<int>(std::lround(params.density * span.x() * span.y()));
}

PointList generate_random_pillars(std::uint64_t seed, const PillarMapParams& params) {
  if (params.density < 0.0) throw std::invalid_argument("pillar density must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(params.area_min.x(), params.area_max.x());
  std::uniform_real_distribution<double> uy(params.area_min.y(), params.area_max.y());
  std::uniform_real_distribution<double> ur(params.radius_min, params.radius_max);
  const int count = pillar_count(params);
  const double res = params.resolution;
  PointList points;
  for (int n = 0; n < count; ++n) {
    Eigen::Vector2d c;
    double radius = 0.0;
    for (int attempt = 0;; ++attempt) {
      c = Eigen::Vector2d(ux(rng), uy(rng));
      radius = ur(rng);
      bool clear = true;
      for (const auto& k : params.keepout) {
        if ((k.head<2>() - c).norm() < params.keepout_radius + radius) clear = false;
      }
      if (clear || attempt > 1000) break;
    }
    // Rasterize the solid disk on the lattice aligned with the resolution;
    // the axis point itself is always included.
    const int reach = static_cast<int>(std::ceil(radius / res));
    const long cx = std::lround(c.x() / res), cy = std::lround(c.y() / res);
    for (double z = params.z_min; z <= params.z_max + 1e-9; z += res) {
      points.emplace_back(c.x(), c.y(), z);
      for (long ix = cx - reach; ix <= cx + reach; ++ix) {
        for (long iy = cy - reach; iy <= cy + reach; ++iy) {
          const Eigen::Vector2d q(ix * res, iy * res);
          if ((q - c).norm() <= radius) points.emplace_back(q.x(), q.y(), z);
        }
      }
    }
  }
  return points;
}

GradientNoise3::GradientNoise3(std::uint64_t seed) : perm_(512) {
  std::vector<int> p(256);
  std::iota(p.begin(), p.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the sequence is library independent.
  for (int i = 255; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  for (int i = 0; i < 512; ++i) perm_[i] = p[i & 255];
}

namespace {

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

double grad(int hash, double x, double y, double z) {
  const int h = hash & 15;
  const double u = h < 8 ? x : y;
  const double v = h < 4 ? y : (h == 12 || h == 14 ? x : z);
  return ((h & 1) ? -u : u) + ((h & 2) ? -v : v);
}

double lerp(double t, double a, double b) { return a + t * (b - a); }

}  // namespace

double GradientNoise3::sample(const Vec3& p) const {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const int X = static_cast<int>(fx) & 255, Y = static_cast<int>(fy) & 255,
            Z = static_cast<int>(fz) & 255;
  const double x = p.x() - fx, y = p.y() - fy, z = p.z() - fz;
  const double u = fade(x), v = fade(y), w = fade(z);
  const auto& P = perm_;
  const int A = P[X] + Y, AA = P[A] + Z, AB = P[A + 1] + Z;
  const int B = P[X + 1] + Y, BA = P[B] + Z, BB = P[B + 1] + Z;
  return lerp(w,
              lerp(v, lerp(u, grad(P[AA], x, y, z), grad(P[BA], x - 1, y, z)),
                   lerp(u, grad(P[AB], x, y - 1, z), grad(P[BB], x - 1, y - 1, z))),
              lerp(v, lerp(u, grad(P[AA + 1], x, y, z - 1), grad(P[BA + 1], x - 1, y, z - 1)),
                   lerp(u, grad(P[AB + 1], x, y - 1, z - 1),
                        grad(P[BB + 1], x - 1, y - 1, z - 1))));
}

PointList generate_noise_map(std::uint64_t seed, const NoiseMapParams& params) {
  if (!(params.threshold > 0.0 && params.threshold < 1.0)) {
    throw std::invalid_argument("noise threshold must lie in (0, 1)");
  }
  const GradientNoise3 noise(seed);
  const GridSpec& g = params.grid;
  PointList points;
  for (int z = 0; z < g.dims.z(); ++z) {
    for (int y = 0; y < g.dims.y(); ++y) {
      for (int x = 0; x < g.dims.x(); ++x) {
        const Vec3 c = g.origin + Vec3(x, y, z) * g.resolution;
        double value = 0.0, amplitude = 1.0, norm = 0.0, freq = 1.0 / params.feature_size;
        for (int o = 0; o < std::max(params.octaves, 1); ++o) {
          value += amplitude * noise.sample(c * freq + Vec3::Constant(0.5 + 17.0 * o));
          norm += amplitude;
          amplitude *= 0.5;
          freq *= 2.0;
        }
        // Gradient noise stays within about +-0.9, so this lies strictly in (0, 1).
        const double level = std::clamp(0.5 + 0.5 * value / norm, 1e-6, 1.0 - 1e-6);
        if (level <= params.threshold) continue;
        bool keep = true;
        for (const auto& k : params.keepout) {
          if ((k - c).norm() < params.keepout_radius) keep = false;
        }
        if (keep) points.push_back(c);
      }
    }
  }
  return points;
}

}  // namespace rbk::env
