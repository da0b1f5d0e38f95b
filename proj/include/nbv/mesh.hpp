#pragma once

#include "nbv/core.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nbv {

// Triangle surface model. Vertices are in the global frame, in meters.
// Faces index into `vertices`; `face_tags` is either empty or one label per
// face (e.g. "ground", "tree", "target").
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> faces;
  std::vector<std::string> face_tags;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  bool has_tags() const { return !face_tags.empty(); }

  const std::string& tag_of(std::size_t face) const {
    static const std::string empty;
    return face < face_tags.size() ? face_tags[face] : empty;
  }

  void bounds(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::max());
    hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (const Vec3& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }

  // Appends another mesh; tags are preserved (missing tags become "").
  void append(const TriangleMesh& other) {
    const uint32_t base = static_cast<uint32_t>(vertices.size());
    const bool tagged = has_tags() || other.has_tags();
    if (tagged && face_tags.size() < faces.size()) face_tags.resize(faces.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& f : other.faces)
      faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    if (tagged) {
      for (std::size_t i = 0; i < other.faces.size(); ++i)
        face_tags.push_back(other.tag_of(i));
    }
  }
};

namespace detail {

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace detail

// Drops faces with repeated indices or (numerically) zero area, warns on
// stderr, and validates index ranges and coordinate finiteness.
inline void sanitize_mesh(TriangleMesh& mesh) {
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) throw IoError("mesh has non-finite vertex coordinates");
  }
  const uint32_t n = static_cast<uint32_t>(mesh.vertices.size());
  std::vector<std::array<uint32_t, 3>> kept;
  std::vector<std::string> kept_tags;
  kept.reserve(mesh.faces.size());
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    if (f[0] >= n || f[1] >= n || f[2] >= n)
      throw IoError("face references vertex index out of range");
    const bool repeated = f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
    const bool sliver =
        !repeated && detail::triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]],
                                           mesh.vertices[f[2]]) <= 0.0;
    if (repeated || sliver) {
      ++dropped;
      continue;
    }
    kept.push_back(f);
    if (mesh.has_tags()) kept_tags.push_back(mesh.tag_of(i));
  }
  if (dropped > 0) {
    std::cerr << "warning: dropped " << dropped << " degenerate face(s)\n";
  }
  mesh.faces = std::move(kept);
  mesh.face_tags = std::move(kept_tags);
}

// ---------------------------------------------------------------------------
// Wavefront OBJ I/O (ASCII, triangles only)
// ---------------------------------------------------------------------------

inline TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file: " + path);
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw ParseError(path, lineno, "malformed vertex line");
      mesh.vertices.push_back(v);
    } else if (head == "f") {
      std::array<long, 3> idx{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ss >> tok)) throw ParseError(path, lineno, "face needs 3 indices");
        // "i", "i/t", "i/t/n", "i//n" all start with the vertex index.
        idx[k] = std::strtol(tok.c_str(), nullptr, 10);
        if (idx[k] == 0) throw ParseError(path, lineno, "bad face index");
        if (idx[k] < 0) idx[k] = static_cast<long>(mesh.vertices.size()) + idx[k] + 1;
      }
      std::string extra;
      if (ss >> extra) throw ParseError(path, lineno, "only triangle faces supported");
      mesh.faces.push_back({static_cast<uint32_t>(idx[0] - 1),
                            static_cast<uint32_t>(idx[1] - 1),
                            static_cast<uint32_t>(idx[2] - 1)});
    }
  }
  sanitize_mesh(mesh);
  return mesh;
}

inline void save_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write OBJ file: " + path);
  for (const Vec3& v : mesh.vertices) {
    out << "v " << detail::format_double(v.x()) << ' ' << detail::format_double(v.y())
        << ' ' << detail::format_double(v.z()) << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw IoError("failed writing OBJ file: " + path);
}

// Sidecar tag file: one "face_id,tag" pair per line. Face ids refer to the
// face order of the accompanying OBJ.
inline void save_face_tags(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write tag file: " + path);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    out << i << ',' << mesh.tag_of(i) << '\n';
  }
}

inline void load_face_tags(const std::string& path, TriangleMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tag file: " + path);
  mesh.face_tags.assign(mesh.faces.size(), std::string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2) throw ParseError(path, lineno, "expected face_id,tag");
    char* end = nullptr;
    const unsigned long id = std::strtoul(fields[0].c_str(), &end, 10);
    if (end == fields[0].c_str() || id >= mesh.faces.size())
      throw ParseError(path, lineno, "face id out of range");
    mesh.face_tags[id] = detail::trim(fields[1]);
  }
}

// ---------------------------------------------------------------------------
// PLY export with a per-vertex scalar ("quality"), for coverage heatmaps
// ---------------------------------------------------------------------------

inline void save_ply_with_quality(const std::string& path, const TriangleMesh& mesh,
                                  const std::vector<double>& quality) {
  if (quality.size() != mesh.vertices.size())
    throw IoError("quality size must match vertex count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write PLY file: " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << '\n';
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "property float quality\n";
  out << "element face " << mesh.faces.size() << '\n';
  out << "property list uchar uint vertex_indices\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    out << static_cast<float>(v.x()) << ' ' << static_cast<float>(v.y()) << ' '
        << static_cast<float>(v.z()) << ' ' << static_cast<float>(quality[i]) << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
  if (!out) throw IoError("failed writing PLY file: " + path);
}

// Reads back the quality column of a PLY written by save_ply_with_quality.
inline std::vector<double> load_ply_quality(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open PLY file: " + path);
  std::string line;
  std::size_t n_vertices = 0;
  std::size_t lineno = 0;
  bool in_header = true;
  while (in_header && std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "element") {
      std::string what;
      std::size_t count;
      ss >> what >> count;
      if (what == "vertex") n_vertices = count;
    } else if (head == "end_header") {
      in_header = false;
    }
  }
  if (in_header) throw ParseError(path, lineno, "missing end_header");
  std::vector<double> quality;
  quality.reserve(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    if (!std::getline(in, line)) throw ParseError(path, lineno + i + 1, "truncated vertex data");
    std::istringstream ss(line);
    double x, y, z, q;
    if (!(ss >> x >> y >> z >> q)) throw ParseError(path, lineno + i + 1, "malformed vertex row");
    quality.push_back(q);
  }
  return quality;
}

// ---------------------------------------------------------------------------
// Vertex -> incident faces adjacency (CSR layout)
// ---------------------------------------------------------------------------

struct VertexAdjacency {
  std::vector<uint32_t> offsets;  // size vertex_count + 1
  std::vector<uint32_t> face_ids; // sorted within each vertex range

  std::pair<const uint32_t*, const uint32_t*> incident(std::size_t vertex) const {
    return {face_ids.data() + offsets[vertex], face_ids.data() + offsets[vertex + 1]};
  }
};

inline VertexAdjacency build_vertex_adjacency(const TriangleMesh& mesh) {
  VertexAdjacency adj;
  adj.offsets.assign(mesh.vertices.size() + 1, 0);
  for (const auto& f : mesh.faces)
    for (uint32_t v : f) ++adj.offsets[v + 1];
  for (std::size_t i = 1; i < adj.offsets.size(); ++i) adj.offsets[i] += adj.offsets[i - 1];
  adj.face_ids.resize(mesh.faces.size() * 3);
  std::vector<uint32_t> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (uint32_t fid = 0; fid < mesh.faces.size(); ++fid)
    for (uint32_t v : mesh.faces[fid]) adj.face_ids[cursor[v]++] = fid;
  // Face ids are appended in increasing order, so each range is already sorted.
  return adj;
}

}  // namespace nbv
