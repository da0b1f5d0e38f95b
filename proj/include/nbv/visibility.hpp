#pragma once

#include "nbv/bvh.hpp"
#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/mesh.hpp"

#include <fstream>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

namespace nbv {

// Immutable bundle of a mesh with its spatial index and vertex adjacency.
// Safe for concurrent read access once built.
struct Scene {
  TriangleMesh mesh;
  AccelIndex index;
  VertexAdjacency adjacency;

  explicit Scene(TriangleMesh m)
      : mesh(std::move(m)), index(mesh), adjacency(build_vertex_adjacency(mesh)) {}
};

inline std::shared_ptr<const Scene> make_scene(TriangleMesh mesh) {
  return std::make_shared<const Scene>(std::move(mesh));
}

// Per-vertex visibility of one vertex from one camera: the vertex must pass
// the frustum test and the camera->vertex segment must be unobstructed. The
// vertex's own incident faces are excluded from occluder candidates; the
// parametric guard alone can miss them at grazing angles.
inline bool vertex_visible(const Scene& scene, const CameraView& cam,
                           uint32_t vertex) {
  const Vec3& v = scene.mesh.vertices[vertex];
  if (!project(cam, v)) return false;
  const auto [first, last] = scene.adjacency.incident(vertex);
  const Ray ray = segment_ray(cam.position, v);
  return !scene.index.any_hit(
      ray, std::span<const uint32_t>(first, static_cast<std::size_t>(last - first)));
}

// Binary visibility vector w over `subset` (all vertices when empty).
inline std::vector<uint8_t> visibility_vector(
    const Scene& scene, const CameraView& cam,
    std::span<const uint32_t> subset = {}) {
  const std::size_t n = subset.empty() ? scene.mesh.vertex_count() : subset.size();
  std::vector<uint8_t> w(n, 0);
  parallel_for(n, [&](std::size_t i) {
    const uint32_t vertex = subset.empty() ? static_cast<uint32_t>(i) : subset[i];
    w[i] = vertex_visible(scene, cam, vertex) ? 1 : 0;
  });
  return w;
}

// Visibility matrix M (vertex x camera) for a set of placed views, plus the
// per-vertex view counts m_i (row sums).
struct VisibilityRecord {
  std::vector<std::vector<uint8_t>> columns;  // one per camera, length N
  std::vector<int> counts;                    // m_i, length N

  std::size_t camera_count() const { return columns.size(); }
  bool visible(std::size_t vertex, std::size_t cam) const {
    return columns[cam][vertex] != 0;
  }
};

inline VisibilityRecord visibility_matrix(const Scene& scene,
                                          std::span<const CameraView> cams,
                                          std::span<const uint32_t> subset = {}) {
  const std::size_t n = subset.empty() ? scene.mesh.vertex_count() : subset.size();
  VisibilityRecord rec;
  rec.counts.assign(n, 0);
  rec.columns.reserve(cams.size());
  for (const CameraView& cam : cams) {
    rec.columns.push_back(visibility_vector(scene, cam, subset));
    for (std::size_t i = 0; i < n; ++i) rec.counts[i] += rec.columns.back()[i];
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Coverage exports (heatmap data)
// ---------------------------------------------------------------------------

inline void coverage_export_ply(const std::string& path, const TriangleMesh& mesh,
                                const std::vector<int>& counts) {
  if (counts.size() != mesh.vertex_count())
    throw IoError("counts size must match vertex count");
  std::vector<double> quality(counts.begin(), counts.end());
  save_ply_with_quality(path, mesh, quality);
}

inline void coverage_export_csv(const std::string& path,
                                const std::vector<int>& counts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write coverage CSV: " + path);
  out << "vertex_id,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) out << i << ',' << counts[i] << '\n';
}

}  // namespace nbv
