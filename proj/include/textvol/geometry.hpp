#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <vector>

#include "textvol/raster.hpp"

namespace textvol {

// A face is visible when it is front-facing, fully inside the image, and
// none of its vertices is occluded by nearer geometry in the depth render.
// The occlusion probe looks at the 3x3 pixel neighborhood: a vertex passes
// when its own face covers a nearby pixel or when the farthest rendered
// depth there is not in front of it, which keeps steep-slope silhouette
// pixels from reading as occluders.
inline std::vector<uint8_t> face_visibility(const std::vector<Vec3>& pos,
                                            const std::vector<std::array<int, 3>>& faces,
                                            const Camera& cam,
                                            const DepthIdMap& render,
                                            double delta_occ) {
  std::vector<uint8_t> visible(faces.size(), 0);
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& tri = faces[f];
    Vec3 n = face_normal(pos, tri);
    Vec3 centroid = face_centroid(pos, tri);
    if (centroid.z() <= 0) continue;
    // outward normal must point toward the camera (at the origin)
    if (n.dot(centroid) >= 0) continue;
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      const Vec3& v = pos[tri[k]];
      if (v.z() <= 0) {
        ok = false;
        break;
      }
      double u = cam.fx * v.x() / v.z() + cam.cx;
      double w = cam.fy * v.y() / v.z() + cam.cy;
      if (u < 0 || u > cam.width - 1 || w < 0 || w > cam.height - 1) {
        ok = false;
        break;
      }
      int px = std::clamp(int(std::floor(u)), 0, cam.width - 1);
      int py = std::clamp(int(std::floor(w)), 0, cam.height - 1);
      bool own_face = false;
      float far_depth = -std::numeric_limits<float>::infinity();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int nx = px + dx, ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= cam.width || ny >= cam.height) continue;
          own_face = own_face || render.id_at(nx, ny) == int(f);
          far_depth = std::max(far_depth, render.depth_at(nx, ny));
        }
      if (!own_face && far_depth < v.z() - delta_occ) ok = false;
    }
    visible[f] = ok ? 1 : 0;
  }
  return visible;
}

namespace detail {

// Least-squares orthogonal alignment (no scale) of src onto dst.
// Returns false when the point sets are degenerate.
inline bool kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                   const std::vector<int>& idx, RigidTransform* out) {
  if (idx.size() < 3) return false;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (int i : idx) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= double(idx.size());
  cd /= double(idx.size());
  Mat3 H = Mat3::Zero();
  for (int i : idx) H += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sv = svd.singularValues();
  // rank >= 2 needed to pin the rotation
  if (sv(1) <= std::max(1e-12, 1e-9 * sv(0))) return false;
  Mat3 U = svd.matrixU(), V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (V * U.transpose()).determinant() < 0 ? -1.0 : 1.0;
  out->rotation = V * D * U.transpose();
  out->translation = cd - out->rotation * cs;
  return true;
}

}  // namespace detail

// RANSAC + least-squares refit over index-paired correspondences.
// Deterministic for a fixed seed.
inline RigidTransform estimate_rigid_alignment(const std::vector<Vec3>& src,
                                               const std::vector<Vec3>& dst,
                                               double inlier_threshold,
                                               uint64_t seed = 0,
                                               int iterations = 256) {
  if (src.size() != dst.size())
    throw ContractError("rigid alignment: correspondence counts differ");
  const int n = int(src.size());
  if (n < 3) throw ContractError("degenerate correspondences: need at least 3 pairs");

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;

  RigidTransform full_fit;
  bool full_ok = detail::kabsch(src, dst, all, &full_fit);
  if (!full_ok) throw ContractError("degenerate correspondences: collinear or coincident points");

  auto count_inliers = [&](const RigidTransform& rt, std::vector<int>* members) {
    int count = 0;
    if (members) members->clear();
    for (int i = 0; i < n; ++i) {
      if ((rt.apply(src[i]) - dst[i]).norm() <= inlier_threshold) {
        ++count;
        if (members) members->push_back(i);
      }
    }
    return count;
  };

  Rng rng(mix_seed(seed, {0x52414e53ull}));
  RigidTransform best = full_fit;
  int best_inliers = count_inliers(full_fit, nullptr);
  for (int it = 0; it < iterations; ++it) {
    int i0 = rng.uniform_int(0, n - 1);
    int i1 = rng.uniform_int(0, n - 1);
    int i2 = rng.uniform_int(0, n - 1);
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;
    RigidTransform cand;
    if (!detail::kabsch(src, dst, {i0, i1, i2}, &cand)) continue;
    int inl = count_inliers(cand, nullptr);
    if (inl > best_inliers) {
      best_inliers = inl;
      best = cand;
    }
  }

  std::vector<int> members;
  count_inliers(best, &members);
  if (members.size() >= 3) {
    RigidTransform refit;
    if (detail::kabsch(src, dst, members, &refit)) {
      // keep the refit only if it does not lose consensus
      int refit_inliers = count_inliers(refit, nullptr);
      if (refit_inliers >= best_inliers) return refit;
    }
  }
  return best;
}

}  // namespace textvol
