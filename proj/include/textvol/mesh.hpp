#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <vector>

#include "textvol/common.hpp"
#include "textvol/image.hpp"

namespace textvol {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw ConfigError("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("camera: image size must be positive");
  }
};

// Pinhole projection of a camera-space point. Throws for points at or
// behind the camera plane.
struct Projected {
  double u, v, depth;
};

inline Projected project(const Vec3& p, const Camera& cam) {
  if (p.z() <= 0.0) throw ContractError("project: point behind camera");
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy, p.z()};
}

inline Vec3 unproject(double u, double v, double depth, const Camera& cam) {
  return Vec3((u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth);
}

struct TriMesh {
  std::vector<Vec3> vertices;            // rest-pose positions (m)
  std::vector<std::array<int, 3>> faces; // CCW winding, outward normals
  std::vector<Vec2> uv;                  // atlas coordinates in [0,1]^2
  std::vector<std::pair<int, int>> face_adjacency;

  int vertex_count() const { return int(vertices.size()); }
  int face_count() const { return int(faces.size()); }

  // Adjacency from shared vertex-index edges. Each interior manifold edge
  // yields exactly one pair.
  void build_adjacency() {
    face_adjacency.clear();
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (int f = 0; f < face_count(); ++f) {
      for (int k = 0; k < 3; ++k) {
        int a = faces[f][k], b = faces[f][(k + 1) % 3];
        edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
      }
    }
    for (const auto& [edge, fs] : edge_faces) {
      if (fs.size() > 2)
        throw ContractError("mesh: non-manifold edge shared by >2 faces");
      if (fs.size() == 2) face_adjacency.emplace_back(fs[0], fs[1]);
    }
  }

  // Vertices shared by two adjacent faces.
  std::pair<int, int> shared_edge(int f0, int f1) const {
    int out[2], n = 0;
    for (int a : faces[f0])
      for (int b : faces[f1])
        if (a == b && n < 2) out[n++] = a;
    if (n != 2) throw ContractError("shared_edge: faces are not adjacent");
    return {out[0], out[1]};
  }

  void validate() const {
    int V = vertex_count();
    if (int(uv.size()) != V) throw ContractError("mesh: uv count != vertex count");
    for (const auto& f : faces) {
      for (int k = 0; k < 3; ++k)
        if (f[k] < 0 || f[k] >= V) throw ContractError("mesh: face index out of range");
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        throw ContractError("mesh: degenerate face (repeated vertex)");
    }
    for (const auto& c : uv)
      if (c.x() < -1e-9 || c.x() > 1 + 1e-9 || c.y() < -1e-9 || c.y() > 1 + 1e-9)
        throw ContractError("mesh: uv outside [0,1]^2");
  }
};

struct MeshSequence {
  TriMesh base;
  std::vector<std::vector<Vec3>> frame_positions;  // [t][v], camera space (m)

  int frame_count() const { return int(frame_positions.size()); }

  void validate() const {
    base.validate();
    for (const auto& fp : frame_positions)
      if (int(fp.size()) != base.vertex_count())
        throw ContractError("sequence: frame position count != vertex count");
  }
};

struct FrameStream {
  std::vector<Image8> colors;
  std::vector<std::vector<uint16_t>> depths;  // mm, 0 = invalid
  Camera camera;

  int frame_count() const { return int(colors.size()); }

  void validate() const {
    camera.validate();
    if (colors.size() != depths.size())
      throw ContractError("stream: color/depth frame counts differ");
    for (const auto& c : colors)
      if (c.width != camera.width || c.height != camera.height || c.channels != 3)
        throw ContractError("stream: color image does not match camera size");
    for (const auto& d : depths)
      if (int(d.size()) != camera.width * camera.height)
        throw ContractError("stream: depth map does not match camera size");
  }

  uint16_t depth_at(int t, int x, int y) const {
    return depths[t][size_t(y) * camera.width + x];
  }

  // Colors with the foreground pushed out over invalid-depth pixels, so
  // samples taken right at the silhouette do not bleed background.
  std::vector<Image8> padded_colors(int rounds = 4) const {
    std::vector<Image8> out(colors.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < frame_count(); ++t) {
      std::vector<uint8_t> valid(depths[t].size());
      for (size_t i = 0; i < valid.size(); ++i) valid[i] = depths[t][i] != 0;
      out[t] = pad_invalid_regions(colors[t], std::move(valid), rounds);
    }
    return out;
  }
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
  }

  void validate(double tol = 1e-6) const {
    if (std::abs(rotation.determinant() - 1.0) > tol)
      throw ContractError("rigid transform: determinant != +1");
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
      throw ContractError("rigid transform: not orthonormal");
  }
};

inline Vec3 face_normal(const std::vector<Vec3>& pos, const std::array<int, 3>& f) {
  Vec3 n = (pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]);
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
}

inline Vec3 face_centroid(const std::vector<Vec3>& pos, const std::array<int, 3>& f) {
  return (pos[f[0]] + pos[f[1]] + pos[f[2]]) / 3.0;
}

inline std::vector<Vec3> vertex_normals_area_weighted(
    const std::vector<Vec3>& pos, const std::vector<std::array<int, 3>>& faces) {
  std::vector<Vec3> normals(pos.size(), Vec3::Zero());
  for (const auto& f : faces) {
    // cross product length = 2*area, so accumulating unnormalized
    // normals is the area weighting
    Vec3 n = (pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]);
    for (int k = 0; k < 3; ++k) normals[f[k]] += n;
  }
  for (auto& n : normals) {
    double len = n.norm();
    if (len > 0) n /= len;
  }
  return normals;
}

inline double mean_edge_length(const std::vector<Vec3>& pos,
                               const std::vector<std::array<int, 3>>& faces) {
  std::map<std::pair<int, int>, double> edges;
  for (const auto& f : faces)
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}] = (pos[a] - pos[b]).norm();
    }
  if (edges.empty()) return 0.0;
  double sum = 0;
  for (const auto& [e, len] : edges) sum += len;
  return sum / double(edges.size());
}

// Vertex -> incident faces.
inline std::vector<std::vector<int>> vertex_face_lists(const TriMesh& mesh) {
  std::vector<std::vector<int>> vf(mesh.vertex_count());
  for (int f = 0; f < mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) vf[mesh.faces[f][k]].push_back(f);
  return vf;
}

// Vertex -> 1-ring vertex neighbors (sorted, unique).
inline std::vector<std::vector<int>> vertex_ring_lists(const TriMesh& mesh) {
  std::vector<std::vector<int>> ring(mesh.vertex_count());
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      ring[f[k]].push_back(f[(k + 1) % 3]);
      ring[f[k]].push_back(f[(k + 2) % 3]);
    }
  for (auto& r : ring) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return ring;
}

}  // namespace textvol
