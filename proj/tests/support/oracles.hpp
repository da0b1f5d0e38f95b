#pragma once

// Independent reference implementations used to cross-check the library:
// exhaustive ray scans, finite differences, dense linear algebra, a
// no-acceleration renderer, and a from-scratch greedy selector. These
// deliberately avoid the code paths they validate.

#include <nbv/nbv.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using nbv::Mat3;
using nbv::Ray;
using nbv::TriangleMesh;
using nbv::Vec3;

// --------------------------------------------------------------------------
// Exhaustive per-face ray queries (no spatial index, same primitive + window)
// --------------------------------------------------------------------------

inline std::optional<nbv::Hit> brute_force_first_hit(const TriangleMesh& mesh, const Ray& ray) {
  const nbv::RayFrame frame = nbv::make_ray_frame(ray);
  const auto [t_min, t_max] = nbv::first_hit_window(ray.t_max);
  std::optional<nbv::Hit> best;
  for (uint32_t f = 0; f < mesh.face_count(); ++f) {
    const auto& tri = mesh.faces[f];
    const auto hit = nbv::intersect_triangle(frame, mesh.vertices[tri[0]],
                                             mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    if (!hit || hit->first <= t_min || hit->first > t_max) continue;
    if (!best || hit->first < best->t || (hit->first == best->t && f < best->face_id))
      best = nbv::Hit{hit->first, f, hit->second};
  }
  return best;
}

inline bool brute_force_any_hit(const TriangleMesh& mesh, const Ray& ray,
                                std::span<const uint32_t> skip_faces = {}) {
  const nbv::RayFrame frame = nbv::make_ray_frame(ray);
  const auto [t_min, t_max] = nbv::any_hit_window(ray.t_max);
  for (uint32_t f = 0; f < mesh.face_count(); ++f) {
    if (std::binary_search(skip_faces.begin(), skip_faces.end(), f)) continue;
    const auto& tri = mesh.faces[f];
    const auto hit = nbv::intersect_triangle(frame, mesh.vertices[tri[0]],
                                             mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    if (hit && hit->first > t_min && hit->first < t_max) return true;
  }
  return false;
}

// Visibility recomputed from scratch: frustum test plus exhaustive occlusion
// scan with the vertex's incident faces excluded.
inline bool brute_force_vertex_visible(const nbv::Scene& scene, const nbv::CameraView& cam,
                                       uint32_t vertex) {
  if (!nbv::project(cam, scene.mesh.vertices[vertex])) return false;
  const auto [first, last] = scene.adjacency.incident(vertex);
  return !brute_force_any_hit(scene.mesh,
                              nbv::segment_ray(cam.position, scene.mesh.vertices[vertex]),
                              std::span<const uint32_t>(first, static_cast<std::size_t>(last - first)));
}

// --------------------------------------------------------------------------
// Camera oracles
// --------------------------------------------------------------------------

// Uncropped pixel coordinates straight from the projection arithmetic.
inline Eigen::Vector2d raw_uv(const nbv::CameraView& cam, const Vec3& n) {
  const Vec3 local = nbv::to_local(cam, n);
  return {cam.focal * local.x() / local.z(), cam.focal * local.y() / local.z()};
}

// Central finite differences of the projection, step h per axis.
inline nbv::Mat23 fd_jacobian(const nbv::CameraView& cam, const Vec3& n, double h = 1e-5) {
  nbv::Mat23 J;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 plus = n, minus = n;
    plus[axis] += h;
    minus[axis] -= h;
    J.col(axis) = (raw_uv(cam, plus) - raw_uv(cam, minus)) / (2.0 * h);
  }
  return J;
}

// --------------------------------------------------------------------------
// Dense linear-algebra oracles
// --------------------------------------------------------------------------

inline double eigen_logdet(const Mat3& g) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(g);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += std::log(solver.eigenvalues()[i]);
  return sum;
}

inline double eigen_det(const Mat3& g) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(g);
  return solver.eigenvalues().prod();
}

// --------------------------------------------------------------------------
// Brute-force target-pixel renderer: merged mesh, per-pixel scan of every
// face, nearest hit wins with ties to the lowest face index.
// --------------------------------------------------------------------------

inline int brute_force_target_pixels(const TriangleMesh& merged, const nbv::CameraView& cam,
                                     const nbv::RenderResolution& res) {
  Vec3 lo, hi;
  merged.bounds(lo, hi);
  double far2 = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                 (corner & 4) ? hi.z() : lo.z());
    far2 = std::max(far2, (p - cam.position).squaredNorm());
  }
  const double t_far = 1.5 * std::sqrt(far2) + 10.0;

  const Eigen::Matrix3d R = nbv::rotation(cam);
  int pixels = 0;
  for (int py = 0; py < res.height; ++py) {
    for (int px = 0; px < res.width; ++px) {
      const double u = ((px + 0.5) / res.width - 0.5) * 2.0 * cam.half_width;
      const double v = ((py + 0.5) / res.height - 0.5) * 2.0 * cam.half_height;
      const Vec3 dir = R * Vec3(u, v, cam.focal).normalized();
      const auto hit = brute_force_first_hit(merged, Ray{cam.position, dir, t_far});
      if (hit && merged.tag_of(hit->face_id) == "target") ++pixels;
    }
  }
  return pixels;
}

// --------------------------------------------------------------------------
// From-scratch greedy selection (mirrors the documented rule: argmax score,
// exact ties to the lowest image id, selected candidates leave the pool)
// --------------------------------------------------------------------------

inline std::vector<long> reference_greedy(const nbv::FitnessContext& initial,
                                          const nbv::ImageDataset& dataset,
                                          nbv::Heuristic heuristic, int n_views) {
  nbv::FitnessContext ctx = initial;
  std::vector<const nbv::PosedImage*> pool;
  for (const auto& im : dataset.images) pool.push_back(&im);
  std::vector<long> picked;
  for (int step = 0; step < n_views; ++step) {
    const nbv::PosedImage* best = nullptr;
    double best_score = 0.0;
    for (const nbv::PosedImage* im : pool) {
      const double score = heuristic == nbv::Heuristic::visibility
                               ? nbv::visibility_fitness(ctx, im->pose)
                               : nbv::geometry_fitness(ctx, im->pose);
      if (!best || score > best_score || (score == best_score && im->id < best->id)) {
        best = im;
        best_score = score;
      }
    }
    picked.push_back(best->id);
    ctx = nbv::commit_view(ctx, best->pose);
    pool.erase(std::find(pool.begin(), pool.end(), best));
  }
  return picked;
}

// --------------------------------------------------------------------------
// Random test geometry
// --------------------------------------------------------------------------

// Triangle soup with `faces` independent random triangles inside a cube.
inline TriangleMesh random_soup(int faces, std::mt19937_64& rng, double extent = 1.0) {
  std::uniform_real_distribution<double> coord(0.0, extent);
  TriangleMesh mesh;
  for (int f = 0; f < faces; ++f) {
    const uint32_t base = static_cast<uint32_t>(mesh.vertices.size());
    for (int k = 0; k < 3; ++k)
      mesh.vertices.emplace_back(coord(rng), coord(rng), coord(rng));
    mesh.faces.push_back({base, base + 1, base + 2});
  }
  return mesh;
}

inline Ray random_ray(std::mt19937_64& rng, double extent = 1.0) {
  std::uniform_real_distribution<double> coord(-0.5 * extent, 1.5 * extent);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
  while (dir.norm() < 1e-6) dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
  std::uniform_real_distribution<double> span(0.1 * extent, 4.0 * extent);
  return Ray{Vec3(coord(rng), coord(rng), coord(rng)), dir.normalized(), span(rng)};
}

}  // namespace oracle
