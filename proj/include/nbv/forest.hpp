#pragma once

#include "nbv/core.hpp"
#include "nbv/mesh.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace nbv {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(rng);
  }
};

struct ForestParams {
  double width = 30.0;   // m
  double depth = 30.0;   // m
  // Defaults are calibrated so a 6x6 nadir survey of a 30x30 m plot spots
  // roughly a third to a half of 100 hidden targets: short trunks keep the
  // canopy skirts near the ground and thick trunks clutter lateral sightlines,
  // which is what keeps low perimeter views from trivially sweeping the plot.
  double tree_density = 0.18;  // trees per m^2
  Range trunk_radius{0.25, 0.5};
  Range trunk_height{0.4, 1.8};
  Range canopy_radius{1.5, 3.5};
  Range canopy_height{2.0, 6.0};
  double canopy_jitter = 0.25;     // radial low-poly irregularity
  double ground_resolution = 1.0;  // m per ground grid cell

  void validate() const {
    if (width <= 0.0 || depth <= 0.0) throw std::invalid_argument("extent must be positive");
    if (tree_density < 0.0) throw std::invalid_argument("density must be nonnegative");
    if (ground_resolution <= 0.0) throw std::invalid_argument("resolution must be positive");
    for (const Range* r : {&trunk_radius, &trunk_height, &canopy_radius, &canopy_height}) {
      if (r->lo <= 0.0 || r->hi < r->lo) throw std::invalid_argument("invalid tree dimension range");
    }
  }
};

struct TreeDesc {
  Vec2 position = Vec2::Zero();
  double trunk_radius = 0.0;
  double trunk_height = 0.0;
  double canopy_radius = 0.0;
  double canopy_height = 0.0;
  uint64_t shape_seed = 0;
};

struct ForestScene {
  ForestParams params;
  uint64_t seed = 0;
  std::vector<TreeDesc> trees;
  TriangleMesh mesh;  // ground + trees, tagged
};

namespace detail {

inline void append_ground(TriangleMesh& mesh, const ForestParams& p) {
  const int nx = std::max(1, static_cast<int>(std::ceil(p.width / p.ground_resolution)));
  const int ny = std::max(1, static_cast<int>(std::ceil(p.depth / p.ground_resolution)));
  const uint32_t base = static_cast<uint32_t>(mesh.vertices.size());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices.emplace_back(p.width * i / nx, p.depth * j / ny, 0.0);
    }
  }
  const auto vid = [&](int i, int j) {
    return base + static_cast<uint32_t>(j * (nx + 1) + i);
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.face_tags.emplace_back("ground");
      mesh.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      mesh.face_tags.emplace_back("ground");
    }
  }
}

// Trunk: 8-sided closed prism from the ground to trunk_height.
inline void append_trunk(TriangleMesh& mesh, const TreeDesc& t) {
  constexpr int kSides = 8;
  const uint32_t base = static_cast<uint32_t>(mesh.vertices.size());
  for (int level = 0; level < 2; ++level) {
    const double z = level == 0 ? 0.0 : t.trunk_height;
    for (int s = 0; s < kSides; ++s) {
      const double a = 2.0 * M_PI * s / kSides;
      mesh.vertices.emplace_back(t.position.x() + t.trunk_radius * std::cos(a),
                                 t.position.y() + t.trunk_radius * std::sin(a), z);
    }
  }
  const uint32_t top_center = static_cast<uint32_t>(mesh.vertices.size());
  mesh.vertices.emplace_back(t.position.x(), t.position.y(), t.trunk_height);
  for (int s = 0; s < kSides; ++s) {
    const uint32_t s1 = static_cast<uint32_t>((s + 1) % kSides);
    const uint32_t b0 = base + s, b1 = base + s1;
    const uint32_t t0 = base + kSides + s, t1 = base + kSides + s1;
    mesh.faces.push_back({b0, b1, t1});
    mesh.faces.push_back({b0, t1, t0});
    mesh.faces.push_back({t0, t1, top_center});
    for (int k = 0; k < 3; ++k) mesh.face_tags.emplace_back("tree");
  }
}

// Canopy: low-poly ellipsoid with per-vertex radial jitter; sits on the
// trunk top, semi-axes (r, r, h/2).
inline void append_canopy(TriangleMesh& mesh, const TreeDesc& t, double jitter) {
  constexpr int kSegments = 7;
  constexpr int kRings = 3;
  std::mt19937_64 shape_rng(t.shape_seed);
  std::uniform_real_distribution<double> jit(-jitter, jitter);

  const Vec3 center(t.position.x(), t.position.y(), t.trunk_height + 0.5 * t.canopy_height);
  const Vec3 semi(t.canopy_radius, t.canopy_radius, 0.5 * t.canopy_height);
  const auto place = [&](double theta, double phi) {
    const Vec3 unit(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                    std::cos(theta));
    const double scale = 1.0 + jit(shape_rng);
    return Vec3(center + scale * semi.cwiseProduct(unit));
  };

  const uint32_t top = static_cast<uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(place(0.0, 0.0));
  std::vector<std::vector<uint32_t>> rings(kRings);
  for (int r = 0; r < kRings; ++r) {
    const double theta = M_PI * (r + 1) / (kRings + 1);
    for (int s = 0; s < kSegments; ++s) {
      rings[r].push_back(static_cast<uint32_t>(mesh.vertices.size()));
      mesh.vertices.push_back(place(theta, 2.0 * M_PI * s / kSegments));
    }
  }
  const uint32_t bottom = static_cast<uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(place(M_PI, 0.0));

  const auto tri = [&](uint32_t a, uint32_t b, uint32_t c) {
    mesh.faces.push_back({a, b, c});
    mesh.face_tags.emplace_back("tree");
  };
  for (int s = 0; s < kSegments; ++s) {
    const int s1 = (s + 1) % kSegments;
    tri(top, rings[0][s], rings[0][s1]);
    for (int r = 0; r + 1 < kRings; ++r) {
      tri(rings[r][s], rings[r + 1][s], rings[r + 1][s1]);
      tri(rings[r][s], rings[r + 1][s1], rings[r][s1]);
    }
    tri(rings[kRings - 1][s], bottom, rings[kRings - 1][s1]);
  }
}

}  // namespace detail

// Procedural randomized forest: trees at uniform positions with dimensions
// drawn from the configured ranges. Deterministic for a fixed seed.
inline ForestScene generate_scene(const ForestParams& params, uint64_t seed) {
  params.validate();
  ForestScene scene;
  scene.params = params;
  scene.seed = seed;

  std::mt19937_64 rng(seed);
  const long tree_count = std::lround(params.tree_density * params.width * params.depth);
  std::uniform_real_distribution<double> ux(0.0, params.width);
  std::uniform_real_distribution<double> uy(0.0, params.depth);
  for (long i = 0; i < tree_count; ++i) {
    TreeDesc t;
    t.position = Vec2(ux(rng), uy(rng));
    t.trunk_radius = params.trunk_radius.sample(rng);
    t.trunk_height = params.trunk_height.sample(rng);
    t.canopy_radius = params.canopy_radius.sample(rng);
    t.canopy_height = params.canopy_height.sample(rng);
    t.shape_seed = rng();
    scene.trees.push_back(t);
  }

  detail::append_ground(scene.mesh, params);
  for (const TreeDesc& t : scene.trees) {
    detail::append_trunk(scene.mesh, t);
    detail::append_canopy(scene.mesh, t, params.canopy_jitter);
  }
  sanitize_mesh(scene.mesh);
  return scene;
}

// ---------------------------------------------------------------------------
// Hidden targets
// ---------------------------------------------------------------------------

struct ManikinParams {
  double length = 1.7;  // m, prone
  double width = 0.5;
  double height = 0.3;
  bool under_canopy = true;  // sample positions inside canopy footprints
  int max_rejections = 100000;

  double footprint_radius() const {
    return 0.5 * std::hypot(length, width);
  }
};

struct Manikin {
  int id = 0;
  Vec2 position = Vec2::Zero();  // body center on the ground
  double yaw = 0.0;
  TriangleMesh body;  // all faces tagged "target"
};

namespace detail {

inline TriangleMesh manikin_body(const Vec2& pos, double yaw, const ManikinParams& p) {
  TriangleMesh mesh;
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double hl = 0.5 * p.length, hw = 0.5 * p.width;
  for (int corner = 0; corner < 8; ++corner) {
    const double lx = (corner & 1) ? hl : -hl;
    const double ly = (corner & 2) ? hw : -hw;
    const double z = (corner & 4) ? p.height : 0.0;
    mesh.vertices.emplace_back(pos.x() + c * lx - s * ly, pos.y() + s * lx + c * ly, z);
  }
  const int quads[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
                           {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
  for (const auto& q : quads) {
    mesh.faces.push_back({static_cast<uint32_t>(q[0]), static_cast<uint32_t>(q[1]),
                          static_cast<uint32_t>(q[2])});
    mesh.faces.push_back({static_cast<uint32_t>(q[0]), static_cast<uint32_t>(q[2]),
                          static_cast<uint32_t>(q[3])});
    mesh.face_tags.emplace_back("target");
    mesh.face_tags.emplace_back("target");
  }
  return mesh;
}

}  // namespace detail

// Places `count` manikins at random ground positions, rejecting trunk
// collisions and manikin-manikin overlap. With under_canopy set (the default)
// positions are drawn uniformly within a random tree's canopy footprint.
inline std::vector<Manikin> place_manikins(const ForestScene& scene, int count,
                                           const ManikinParams& params, uint64_t seed) {
  if (count < 0) throw std::invalid_argument("manikin count must be >= 0");
  if (params.under_canopy && scene.trees.empty() && count > 0)
    throw PlacementError("under-canopy placement requires at least one tree");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double body_r = params.footprint_radius();

  std::vector<Manikin> manikins;
  manikins.reserve(count);
  int rejections = 0;
  while (static_cast<int>(manikins.size()) < count) {
    Vec2 pos;
    if (params.under_canopy) {
      std::uniform_int_distribution<std::size_t> pick(0, scene.trees.size() - 1);
      const TreeDesc& tree = scene.trees[pick(rng)];
      const double radius = tree.canopy_radius * std::sqrt(unit(rng));
      const double angle = 2.0 * M_PI * unit(rng);
      pos = tree.position + radius * Vec2(std::cos(angle), std::sin(angle));
    } else {
      pos = Vec2(scene.params.width * unit(rng), scene.params.depth * unit(rng));
    }
    const double yaw = 2.0 * M_PI * unit(rng);

    bool ok = pos.x() >= 0.0 && pos.x() <= scene.params.width && pos.y() >= 0.0 &&
              pos.y() <= scene.params.depth;
    for (const TreeDesc& tree : scene.trees) {
      if (!ok) break;
      if ((pos - tree.position).norm() < tree.trunk_radius + body_r) ok = false;
    }
    for (const Manikin& other : manikins) {
      if (!ok) break;
      if ((pos - other.position).norm() < 2.0 * body_r) ok = false;
    }
    if (!ok) {
      if (++rejections > params.max_rejections)
        throw PlacementError("manikin placement failed after " +
                             std::to_string(rejections) + " rejections");
      continue;
    }
    Manikin m;
    m.id = static_cast<int>(manikins.size());
    m.position = pos;
    m.yaw = yaw;
    m.body = detail::manikin_body(pos, yaw, params);
    manikins.push_back(std::move(m));
  }
  return manikins;
}

// Scene mesh with one manikin's body merged in (ground truth for rendering).
inline TriangleMesh scene_with_manikin(const ForestScene& scene, const Manikin& manikin) {
  TriangleMesh merged = scene.mesh;
  merged.append(manikin.body);
  return merged;
}

inline void save_manikin_csv(const std::string& path,
                             const std::vector<Manikin>& manikins) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manikin CSV: " + path);
  out << "id,x,y,yaw_deg\n";
  for (const Manikin& m : manikins) {
    out << m.id << ',' << detail::format_double(m.position.x()) << ','
        << detail::format_double(m.position.y()) << ','
        << detail::format_double(m.yaw * 180.0 / M_PI) << '\n';
  }
}

}  // namespace nbv
