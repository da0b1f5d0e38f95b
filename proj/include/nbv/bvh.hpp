#pragma once

#include "nbv/core.hpp"
#include "nbv/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace nbv {

// Relative parametric tolerance: segment queries ignore hits within
// kParametricEpsilon * t_max of either endpoint so that a surface point never
// occludes itself against its own faces.
inline constexpr double kParametricEpsilon = 1e-6;

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_max = 0.0;

  bool valid() const {
    return std::abs(direction.norm() - 1.0) <= 1e-9 && t_max > 0.0 &&
           origin.allFinite();
  }
};

// Segment query from `from` to `to`: t_max is the endpoint distance.
inline Ray segment_ray(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  const double len = d.norm();
  return Ray{from, d / len, len};
}

struct Hit {
  double t = 0.0;
  uint32_t face_id = 0;
  Vec3 barycentric = Vec3::Zero();  // weights of face vertices (a, b, c)
};

// Accepted t-windows. intersect_first keeps hits in (eps, t_max]; any_hit
// guards both segment ends, (eps, t_max - eps).
inline std::pair<double, double> first_hit_window(double t_max) {
  return {kParametricEpsilon * t_max, t_max};
}
inline std::pair<double, double> any_hit_window(double t_max) {
  return {kParametricEpsilon * t_max, t_max * (1.0 - kParametricEpsilon)};
}

// ---------------------------------------------------------------------------
// Watertight ray-triangle test (shear-and-scale formulation)
// ---------------------------------------------------------------------------

// Per-ray precomputation for the watertight test: axis permutation putting
// the dominant direction component on z, plus shear constants.
struct RayFrame {
  Vec3 origin;
  int kx, ky, kz;
  double sx, sy, sz;
};

inline RayFrame make_ray_frame(const Ray& ray) {
  RayFrame f;
  f.origin = ray.origin;
  const Vec3 ad = ray.direction.cwiseAbs();
  f.kz = 0;
  if (ad.y() > ad.x()) f.kz = 1;
  if (ad.z() > ad[f.kz]) f.kz = 2;
  f.kx = (f.kz + 1) % 3;
  f.ky = (f.kx + 1) % 3;
  if (ray.direction[f.kz] < 0.0) std::swap(f.kx, f.ky);
  f.sz = 1.0 / ray.direction[f.kz];
  f.sx = ray.direction[f.kx] * f.sz;
  f.sy = ray.direction[f.ky] * f.sz;
  return f;
}

// Unwindowed intersection: returns the parametric distance and barycentric
// weights of the crossing, or nothing when the ray line misses the triangle.
// Callers apply their own t-window. Shared-edge hits resolve consistently for
// adjacent triangles (edge coefficients are computed identically), which is
// what makes the test watertight.
inline std::optional<std::pair<double, Vec3>> intersect_triangle(
    const RayFrame& f, const Vec3& va, const Vec3& vb, const Vec3& vc) {
  const Vec3 a = va - f.origin;
  const Vec3 b = vb - f.origin;
  const Vec3 c = vc - f.origin;

  const double ax = a[f.kx] - f.sx * a[f.kz];
  const double ay = a[f.ky] - f.sy * a[f.kz];
  const double bx = b[f.kx] - f.sx * b[f.kz];
  const double by = b[f.ky] - f.sy * b[f.kz];
  const double cx = c[f.kx] - f.sx * c[f.kz];
  const double cy = c[f.ky] - f.sy * c[f.kz];

  double u = cx * by - cy * bx;
  double v = ax * cy - ay * cx;
  double w = bx * ay - by * ax;

  // Re-evaluate edge terms in extended precision when one lands exactly on
  // zero; keeps shared-edge decisions consistent between neighbor triangles.
  if (u == 0.0 || v == 0.0 || w == 0.0) {
    u = static_cast<double>(static_cast<long double>(cx) * by -
                            static_cast<long double>(cy) * bx);
    v = static_cast<double>(static_cast<long double>(ax) * cy -
                            static_cast<long double>(ay) * cx);
    w = static_cast<double>(static_cast<long double>(bx) * ay -
                            static_cast<long double>(by) * ax);
  }

  if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0))
    return std::nullopt;
  const double det = u + v + w;
  if (det == 0.0) return std::nullopt;

  const double az = f.sz * a[f.kz];
  const double bz = f.sz * b[f.kz];
  const double cz = f.sz * c[f.kz];
  const double t = (u * az + v * bz + w * cz) / det;
  return std::make_pair(t, Vec3(u / det, v / det, w / det));
}

// ---------------------------------------------------------------------------
// Bounding volume hierarchy (midpoint split, median fallback)
// ---------------------------------------------------------------------------

class AccelIndex {
 public:
  explicit AccelIndex(const TriangleMesh& mesh) {
    if (mesh.faces.empty()) throw EmptyMeshError("cannot build index over empty mesh");
    prims_.reserve(mesh.faces.size());
    for (uint32_t i = 0; i < mesh.faces.size(); ++i) {
      const auto& fc = mesh.faces[i];
      prims_.push_back(
          {mesh.vertices[fc[0]], mesh.vertices[fc[1]], mesh.vertices[fc[2]], i});
    }
    std::vector<Vec3> centroids(prims_.size());
    for (std::size_t i = 0; i < prims_.size(); ++i)
      centroids[i] = (prims_[i].a + prims_[i].b + prims_[i].c) / 3.0;
    std::vector<uint32_t> order(prims_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<uint32_t>(i);
    build_node(order, 0, static_cast<uint32_t>(order.size()), centroids, 0);
    // Reorder primitives into leaf-contiguous layout.
    std::vector<Prim> sorted;
    sorted.reserve(prims_.size());
    for (uint32_t idx : order) sorted.push_back(prims_[idx]);
    prims_ = std::move(sorted);
  }

  std::optional<Hit> intersect_first(const Ray& ray) const {
    assert(ray.valid());
    const auto [t_lo, t_hi] = first_hit_window(ray.t_max);
    const RayFrame frame = make_ray_frame(ray);
    const Vec3 inv = ray.direction.cwiseInverse();

    std::optional<Hit> best;
    double limit = t_hi;
    uint32_t stack[kMaxDepth + 2];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!box_hit(node, ray.origin, inv, limit)) continue;
      if (node.count > 0) {
        for (uint32_t i = node.start; i < node.start + node.count; ++i) {
          const Prim& p = prims_[i];
          const auto isect = intersect_triangle(frame, p.a, p.b, p.c);
          if (!isect) continue;
          const double t = isect->first;
          if (t <= t_lo || t > t_hi) continue;
          // Ties on shared edges resolve to the lowest face id.
          if (!best || t < best->t || (t == best->t && p.face_id < best->face_id)) {
            best = Hit{t, p.face_id, isect->second};
            limit = best->t;
          }
        }
      } else {
        stack[top++] = node.right;
        stack[top++] = node.start;  // near-ish child last => popped first
      }
    }
    return best;
  }

  bool any_hit(const Ray& ray, std::span<const uint32_t> skip_faces = {}) const {
    assert(ray.valid());
    const auto [t_lo, t_hi] = any_hit_window(ray.t_max);
    const RayFrame frame = make_ray_frame(ray);
    const Vec3 inv = ray.direction.cwiseInverse();

    uint32_t stack[kMaxDepth + 2];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!box_hit(node, ray.origin, inv, t_hi)) continue;
      if (node.count > 0) {
        for (uint32_t i = node.start; i < node.start + node.count; ++i) {
          const Prim& p = prims_[i];
          if (!skip_faces.empty() &&
              std::binary_search(skip_faces.begin(), skip_faces.end(), p.face_id))
            continue;
          const auto isect = intersect_triangle(frame, p.a, p.b, p.c);
          if (isect && isect->first > t_lo && isect->first < t_hi) return true;
        }
      } else {
        stack[top++] = node.right;
        stack[top++] = node.start;
      }
    }
    return false;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t face_count() const { return prims_.size(); }

 private:
  static constexpr uint32_t kLeafSize = 4;
  static constexpr int kMaxDepth = 60;
  // Boxes are padded so that rays running exactly along a box plane still
  // visit the node (keeps the slab test free of 0 * inf).
  static constexpr double kBoxPad = 1e-7;

  struct Prim {
    Vec3 a, b, c;
    uint32_t face_id;
  };
  struct Node {
    Vec3 bmin, bmax;
    uint32_t start = 0;  // leaf: first prim; inner: left child
    uint32_t count = 0;  // leaf iff count > 0
    uint32_t right = 0;
  };

  static bool box_hit(const Node& n, const Vec3& o, const Vec3& inv, double limit) {
    double t0 = 0.0, t1 = limit;
    for (int a = 0; a < 3; ++a) {
      const double ta = (n.bmin[a] - o[a]) * inv[a];
      const double tb = (n.bmax[a] - o[a]) * inv[a];
      t0 = std::max(t0, std::min(ta, tb));
      t1 = std::min(t1, std::max(ta, tb));
    }
    return t0 <= t1;
  }

  uint32_t build_node(std::vector<uint32_t>& order, uint32_t begin, uint32_t end,
                      const std::vector<Vec3>& centroids, int depth) {
    const uint32_t node_id = static_cast<uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Vec3 bmin = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 bmax = Vec3::Constant(std::numeric_limits<double>::lowest());
    Vec3 cmin = bmin, cmax = bmax;
    for (uint32_t i = begin; i < end; ++i) {
      const Prim& p = prims_[order[i]];
      bmin = bmin.cwiseMin(p.a).cwiseMin(p.b).cwiseMin(p.c);
      bmax = bmax.cwiseMax(p.a).cwiseMax(p.b).cwiseMax(p.c);
      cmin = cmin.cwiseMin(centroids[order[i]]);
      cmax = cmax.cwiseMax(centroids[order[i]]);
    }
    nodes_[node_id].bmin = bmin.array() - kBoxPad;
    nodes_[node_id].bmax = bmax.array() + kBoxPad;

    const uint32_t count = end - begin;
    const Vec3 cext = cmax - cmin;
    int axis = 0;
    if (cext.y() > cext.x()) axis = 1;
    if (cext.z() > cext[axis]) axis = 2;

    if (count <= kLeafSize || depth >= kMaxDepth || cext[axis] <= 0.0) {
      nodes_[node_id].start = begin;
      nodes_[node_id].count = count;
      ++leaf_count_;
      return node_id;
    }

    const double mid_coord = 0.5 * (cmin[axis] + cmax[axis]);
    // Order-preserving partition keeps builds deterministic.
    std::vector<uint32_t> left, right;
    left.reserve(count);
    right.reserve(count);
    for (uint32_t i = begin; i < end; ++i) {
      (centroids[order[i]][axis] < mid_coord ? left : right).push_back(order[i]);
    }
    if (left.empty() || right.empty()) {
      // All centroids on one side of the midpoint: fall back to a median
      // split on (coordinate, face id).
      std::vector<uint32_t> all(order.begin() + begin, order.begin() + end);
      std::sort(all.begin(), all.end(), [&](uint32_t x, uint32_t y) {
        const double cx = centroids[x][axis], cy = centroids[y][axis];
        return cx < cy || (cx == cy && x < y);
      });
      const std::size_t half = all.size() / 2;
      left.assign(all.begin(), all.begin() + half);
      right.assign(all.begin() + half, all.end());
    }
    std::copy(left.begin(), left.end(), order.begin() + begin);
    std::copy(right.begin(), right.end(), order.begin() + begin + left.size());

    const uint32_t mid = begin + static_cast<uint32_t>(left.size());
    const uint32_t left_id = build_node(order, begin, mid, centroids, depth + 1);
    const uint32_t right_id = build_node(order, mid, end, centroids, depth + 1);
    nodes_[node_id].start = left_id;
    nodes_[node_id].right = right_id;
    nodes_[node_id].count = 0;
    return node_id;
  }

  std::vector<Prim> prims_;
  std::vector<Node> nodes_;
  std::size_t leaf_count_ = 0;
};

inline AccelIndex build_accel(const TriangleMesh& mesh) { return AccelIndex(mesh); }

inline std::optional<Hit> intersect_first(const AccelIndex& index, const Ray& ray) {
  return index.intersect_first(ray);
}

inline bool any_hit(const AccelIndex& index, const Ray& ray,
                    std::span<const uint32_t> skip_faces = {}) {
  return index.any_hit(ray, skip_faces);
}

}  // namespace nbv
