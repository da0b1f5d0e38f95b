#pragma once

#include "nbv/bvh.hpp"
#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/forest.hpp"
#include "nbv/visibility.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace nbv {

struct RenderResolution {
  int width = 160;
  int height = 120;
};

// Primary ray through the center of pixel (px, py). Pixel (0, 0) maps to the
// top-left image corner: +v in camera space points down the image.
inline Ray primary_ray(const CameraView& cam, int px, int py,
                       const RenderResolution& res, double t_far) {
  const double u = ((px + 0.5) / res.width - 0.5) * 2.0 * cam.half_width;
  const double v = ((py + 0.5) / res.height - 0.5) * 2.0 * cam.half_height;
  const Vec3 dir = rotation(cam) * Vec3(u, v, cam.focal).normalized();
  return Ray{cam.position, dir, t_far};
}

namespace detail {

inline double far_limit(const CameraView& cam, const Vec3& lo, const Vec3& hi) {
  double far2 = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                 (corner & 4) ? hi.z() : lo.z());
    far2 = std::max(far2, (p - cam.position).squaredNorm());
  }
  return 1.5 * std::sqrt(far2) + 10.0;
}

struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

// Conservative pixel bounds of a world-space box: the projection of a convex
// set lying wholly in front of the camera is convex, so the projected corners
// bound it. Falls back to the full frame when any corner reaches the near
// plane.
inline PixelRect project_box(const CameraView& cam, const RenderResolution& res,
                             const Vec3& lo, const Vec3& hi) {
  const PixelRect full{0, 0, res.width, res.height};
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                 (corner & 4) ? hi.z() : lo.z());
    const Vec3 local = to_local(cam, p);
    if (local.z() <= kNearPlane) return full;
    const double u = cam.focal * local.x() / local.z();
    const double v = cam.focal * local.y() / local.z();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  PixelRect r;
  r.x0 = std::max(0, static_cast<int>(std::floor((umin / (2.0 * cam.half_width) + 0.5) * res.width)) - 1);
  r.x1 = std::min(res.width, static_cast<int>(std::ceil((umax / (2.0 * cam.half_width) + 0.5) * res.width)) + 1);
  r.y0 = std::max(0, static_cast<int>(std::floor((vmin / (2.0 * cam.half_height) + 0.5) * res.height)) - 1);
  r.y1 = std::min(res.height, static_cast<int>(std::ceil((vmax / (2.0 * cam.half_height) + 0.5) * res.height)) + 1);
  return r;
}

}  // namespace detail

// Number of image pixels whose nearest surface is the target body. Equivalent
// to rendering the merged scene and counting target-tagged primary hits, with
// the tie at equal depth going to the environment.
inline int render_count_target_pixels(const Scene& world, const Scene& target,
                                      const CameraView& cam, const RenderResolution& res) {
  Vec3 wlo, whi, tlo, thi;
  world.mesh.bounds(wlo, whi);
  target.mesh.bounds(tlo, thi);
  const double t_far = detail::far_limit(cam, wlo.cwiseMin(tlo), whi.cwiseMax(thi));
  const detail::PixelRect rect = detail::project_box(cam, res, tlo, thi);
  if (rect.empty()) return 0;

  int pixels = 0;
  for (int py = rect.y0; py < rect.y1; ++py) {
    for (int px = rect.x0; px < rect.x1; ++px) {
      const Ray ray = primary_ray(cam, px, py, res, t_far);
      const auto target_hit = target.index.intersect_first(ray);
      if (!target_hit) continue;
      const auto world_hit = world.index.intersect_first(ray);
      if (world_hit && world_hit->t <= target_hit->t) continue;
      ++pixels;
    }
  }
  return pixels;
}

inline int render_count_target_pixels(const ForestScene& scene, const Manikin& manikin,
                                      const CameraView& cam, const RenderResolution& res) {
  const Scene world(TriangleMesh(scene.mesh));
  const Scene target(TriangleMesh(manikin.body));
  return render_count_target_pixels(world, target, cam, res);
}

// ---------------------------------------------------------------------------
// Detection bookkeeping across a camera sequence
// ---------------------------------------------------------------------------

struct DetectionTable {
  // pixels[m][c]: target pixel count of manikin m in camera c's image.
  std::vector<std::vector<int>> pixels;

  int manikin_count() const { return static_cast<int>(pixels.size()); }
  int camera_count() const {
    return pixels.empty() ? 0 : static_cast<int>(pixels.front().size());
  }
  bool detected(int manikin, int camera) const { return pixels[manikin][camera] > 0; }

  // Manikins seen in at least one of the first `prefix` images.
  int detected_within(int prefix) const {
    int found = 0;
    for (const auto& row : pixels) {
      for (int c = 0; c < prefix; ++c) {
        if (row[c] > 0) {
          ++found;
          break;
        }
      }
    }
    return found;
  }

  // detected_curve()[k]: manikins found using the first k+1 cameras.
  std::vector<int> detected_curve() const {
    std::vector<int> curve(camera_count());
    for (int c = 0; c < camera_count(); ++c) curve[c] = detected_within(c + 1);
    return curve;
  }

  // pixel_curve()[k]: total target pixels over the first k+1 cameras.
  std::vector<long long> pixel_curve() const {
    std::vector<long long> curve(camera_count(), 0);
    for (const auto& row : pixels)
      for (int c = 0; c < camera_count(); ++c) curve[c] += row[c];
    for (int c = 1; c < camera_count(); ++c) curve[c] += curve[c - 1];
    return curve;
  }
};

// Renders every manikin under every camera. Each manikin body gets its own
// acceleration index, built once and shared across cameras.
inline DetectionTable detection_table(const Scene& world, const std::vector<Manikin>& manikins,
                                      std::span<const CameraView> cameras,
                                      const RenderResolution& res) {
  std::vector<std::shared_ptr<const Scene>> targets;
  targets.reserve(manikins.size());
  for (const Manikin& m : manikins) targets.push_back(make_scene(TriangleMesh(m.body)));

  DetectionTable table;
  table.pixels.assign(manikins.size(), std::vector<int>(cameras.size(), 0));
  parallel_for(manikins.size() * cameras.size(), [&](std::size_t job) {
    const std::size_t m = job / cameras.size();
    const std::size_t c = job % cameras.size();
    table.pixels[m][c] = render_count_target_pixels(world, *targets[m], cameras[c], res);
  });
  return table;
}

inline void save_detection_csv(const std::string& path, const DetectionTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write detection CSV: " + path);
  out << "manikin_id,camera_id,pixels\n";
  for (int m = 0; m < table.manikin_count(); ++m)
    for (int c = 0; c < table.camera_count(); ++c)
      out << m << ',' << c << ',' << table.pixels[m][c] << '\n';
}

inline void save_curves_csv(const std::string& path, const DetectionTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve CSV: " + path);
  out << "num_cameras,detected_manikins,total_pixels\n";
  const auto detected = table.detected_curve();
  const auto px = table.pixel_curve();
  for (int c = 0; c < table.camera_count(); ++c)
    out << (c + 1) << ',' << detected[c] << ',' << px[c] << '\n';
}

}  // namespace nbv
