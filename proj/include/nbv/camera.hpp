#pragma once

#include "nbv/core.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nbv {

// Points closer than this along the optical axis do not project (avoids the
// division blow-up at z' -> 0).
inline constexpr double kNearPlane = 0.01;

inline constexpr double deg_to_rad(double deg) { return deg * M_PI / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / M_PI; }

// Pinhole camera pose. Orientation is pitch/yaw only; roll is fixed at zero.
// pitch is measured from horizontal (-pi/2 is straight down), yaw from
// global +X toward +Y. Image-plane extents share the unit of `focal`.
struct CameraView {
  Vec3 position = Vec3::Zero();
  double pitch = 0.0;  // radians, [-pi/2, pi/2]
  double yaw = 0.0;    // radians, (-pi, pi]
  double focal = 1.0;
  double half_width = 1.0;
  double half_height = 1.0;

  bool valid() const {
    return focal > 0.0 && half_width > 0.0 && half_height > 0.0 &&
           pitch >= -M_PI_2 - 1e-12 && pitch <= M_PI_2 + 1e-12 &&
           position.allFinite();
  }

  double hfov() const { return 2.0 * std::atan2(half_width, focal); }
  double vfov() const { return 2.0 * std::atan2(half_height, focal); }
};

inline CameraView make_camera(const Vec3& position, double pitch, double yaw,
                              double focal, double hfov, double vfov) {
  CameraView cam;
  cam.position = position;
  cam.pitch = pitch;
  cam.yaw = yaw;
  cam.focal = focal;
  cam.half_width = focal * std::tan(0.5 * hfov);
  cam.half_height = focal * std::tan(0.5 * vfov);
  return cam;
}

// Unit view direction for a pitch/yaw pair.
inline Vec3 view_direction(double pitch, double yaw) {
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
          std::sin(pitch)};
}

// Local->global rotation. Columns are the camera axes expressed in the global
// frame: +Z is the view direction, +X is horizontal image-right (zero roll),
// +Y completes the right-handed frame (points image-down for a level camera).
inline Mat3 rotation_from_angles(double pitch, double yaw) {
  const Vec3 z = view_direction(pitch, yaw);
  const Vec3 x(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

inline Mat3 rotation(const CameraView& cam) {
  return rotation_from_angles(cam.pitch, cam.yaw);
}

// Global point -> camera frame: n' = R^T (n - o).
inline Vec3 to_local(const CameraView& cam, const Vec3& n) {
  return rotation(cam).transpose() * (n - cam.position);
}

inline Vec3 to_global(const CameraView& cam, const Vec3& local) {
  return cam.position + rotation(cam) * local;
}

// Pinhole projection u = f x'/z', v = f y'/z'. Absent when the point is
// behind the near plane or outside the image extents.
inline std::optional<Vec2> project(const CameraView& cam, const Vec3& n) {
  const Vec3 local = to_local(cam, n);
  if (local.z() <= kNearPlane) return std::nullopt;
  const Vec2 pix(cam.focal * local.x() / local.z(),
                 cam.focal * local.y() / local.z());
  if (std::abs(pix.x()) > cam.half_width || std::abs(pix.y()) > cam.half_height)
    return std::nullopt;
  return pix;
}

// Jacobian of the projection with respect to the global point, evaluated at n.
// With r1, r2, r3 the columns of R and (x', y', z') the local coordinates:
//   du/dn = f (z' r1 - x' r3)^T / z'^2
//   dv/dn = f (z' r2 - y' r3)^T / z'^2
// The line of sight n - o is in the null space.
inline Mat23 colinearity_jacobian(const CameraView& cam, const Vec3& n) {
  const Mat3 r = rotation(cam);
  const Vec3 local = r.transpose() * (n - cam.position);
  const double z = local.z();
  if (z <= kNearPlane)
    throw BehindCameraError("point does not project: z' = " + std::to_string(z));
  const double inv_z2 = 1.0 / (z * z);
  Mat23 jac;
  jac.row(0) = cam.focal * inv_z2 * (z * r.col(0) - local.x() * r.col(2)).transpose();
  jac.row(1) = cam.focal * inv_z2 * (z * r.col(1) - local.y() * r.col(2)).transpose();
  return jac;
}

// ---------------------------------------------------------------------------
// Camera pose CSV: id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg
// ---------------------------------------------------------------------------

inline const char* kCameraCsvHeader = "id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg";

inline void save_camera_csv(const std::string& path,
                            const std::vector<CameraView>& cams) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write camera CSV: " + path);
  out << kCameraCsvHeader << '\n';
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const CameraView& c = cams[i];
    out << i << ',' << detail::format_double(c.position.x()) << ','
        << detail::format_double(c.position.y()) << ','
        << detail::format_double(c.position.z()) << ','
        << detail::format_double(rad_to_deg(c.pitch)) << ','
        << detail::format_double(rad_to_deg(c.yaw)) << ','
        << detail::format_double(c.focal) << ','
        << detail::format_double(rad_to_deg(c.hfov())) << ','
        << detail::format_double(rad_to_deg(c.vfov())) << '\n';
  }
}

namespace detail {

inline double parse_double_field(const std::string& field, const std::string& path,
                                 std::size_t lineno, const char* what) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(field, &consumed);
    if (consumed != field.size() && !trim(field.substr(consumed)).empty())
      throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, lineno, std::string("non-numeric ") + what + ": '" + field + "'");
  }
}

}  // namespace detail

inline std::vector<CameraView> load_camera_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera CSV: " + path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  ++lineno;
  std::vector<CameraView> cams;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() < 9) throw ParseError(path, lineno, "expected 9 columns");
    const double x = detail::parse_double_field(f[1], path, lineno, "x");
    const double y = detail::parse_double_field(f[2], path, lineno, "y");
    const double z = detail::parse_double_field(f[3], path, lineno, "z");
    const double pitch = detail::parse_double_field(f[4], path, lineno, "pitch");
    const double yaw = detail::parse_double_field(f[5], path, lineno, "yaw");
    const double focal = detail::parse_double_field(f[6], path, lineno, "f");
    const double hfov = detail::parse_double_field(f[7], path, lineno, "hfov");
    const double vfov = detail::parse_double_field(f[8], path, lineno, "vfov");
    cams.push_back(make_camera({x, y, z}, deg_to_rad(pitch), deg_to_rad(yaw), focal,
                               deg_to_rad(hfov), deg_to_rad(vfov)));
  }
  return cams;
}

}  // namespace nbv
