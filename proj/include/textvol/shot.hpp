#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

#include "textvol/geodesic.hpp"

namespace textvol {

// Histogram layout: 8 azimuth x 2 elevation x 2 radial shells, 10 bins of
// cos(angle between neighbor normal and seed normal) each -> 320 values.
struct ShotParams {
  int azimuth_bins = 8;
  int elevation_bins = 2;
  int radial_bins = 2;
  int cosine_bins = 10;
  int min_neighbors = 5;

  int dim() const { return azimuth_bins * elevation_bins * radial_bins * cosine_bins; }
};

namespace detail {

// Repeatable local reference frame: distance-weighted covariance of
// neighbor offsets, eigenvectors ordered by decreasing eigenvalue, axis
// signs disambiguated toward the majority of offsets.
inline bool shot_local_frame(const std::vector<Vec3>& pos,
                             const std::vector<GeodesicNeighbor>& hood, int seed,
                             double radius, Mat3* frame) {
  const Vec3& p = pos[seed];
  Mat3 cov = Mat3::Zero();
  double wsum = 0;
  for (const auto& nb : hood) {
    if (nb.vertex == seed) continue;
    double w = radius - nb.distance;
    if (w <= 0) continue;
    Vec3 d = pos[nb.vertex] - p;
    cov += w * (d * d.transpose());
    wsum += w;
  }
  if (wsum <= 0) return false;
  cov /= wsum;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.info() != Eigen::Success) return false;
  // SelfAdjointEigenSolver sorts eigenvalues ascending
  Vec3 x_axis = eig.eigenvectors().col(2);
  Vec3 z_axis = eig.eigenvectors().col(0);
  int x_pos = 0, x_neg = 0, z_pos = 0, z_neg = 0;
  for (const auto& nb : hood) {
    if (nb.vertex == seed) continue;
    Vec3 d = pos[nb.vertex] - p;
    (d.dot(x_axis) >= 0 ? x_pos : x_neg)++;
    (d.dot(z_axis) >= 0 ? z_pos : z_neg)++;
  }
  if (x_neg > x_pos) x_axis = -x_axis;
  if (z_neg > z_pos) z_axis = -z_axis;
  Vec3 y_axis = z_axis.cross(x_axis);
  frame->col(0) = x_axis;
  frame->col(1) = y_axis;
  frame->col(2) = z_axis;
  return true;
}

inline void soft_bin(double coord, int bins, bool wrap, int* b0, int* b1, double* w1) {
  // coord is a continuous bin position in [0, bins); contribution is
  // shared with the nearest neighboring bin center
  double c = coord - 0.5;
  int lo = int(std::floor(c));
  *w1 = c - lo;
  if (wrap) {
    *b0 = (lo % bins + bins) % bins;
    *b1 = (*b0 + 1) % bins;
  } else {
    *b0 = std::clamp(lo, 0, bins - 1);
    *b1 = std::clamp(lo + 1, 0, bins - 1);
  }
}

}  // namespace detail

// SHOT signature of one vertex over a precomputed geodesic neighborhood.
// Fewer than `min_neighbors` neighbors yields the zero vector, which marks
// the descriptor uninformative.
inline std::vector<float> compute_shot(const std::vector<Vec3>& pos,
                                       const std::vector<Vec3>& normals,
                                       const std::vector<GeodesicNeighbor>& hood,
                                       int seed, double radius,
                                       const ShotParams& params = {}) {
  if (hood.empty()) throw ContractError("compute_shot: empty neighborhood");
  std::vector<float> desc(params.dim(), 0.f);
  int others = 0;
  for (const auto& nb : hood)
    if (nb.vertex != seed) ++others;
  if (others < params.min_neighbors) return desc;  // flagged low-confidence

  Mat3 frame;
  if (!detail::shot_local_frame(pos, hood, seed, radius, &frame)) return desc;

  const Vec3& p = pos[seed];
  const Vec3& n_seed = normals[seed];
  const int caz = params.cosine_bins;
  const int cel = params.radial_bins * caz;
  const int crd = caz;
  (void)crd;
  for (const auto& nb : hood) {
    if (nb.vertex == seed) continue;
    Vec3 d = pos[nb.vertex] - p;
    Vec3 q = frame.transpose() * d;
    double rlen = q.norm();
    if (rlen < 1e-12) continue;

    double az = std::atan2(q.y(), q.x());                     // (-pi, pi]
    double az_coord = (az + M_PI) / (2.0 * M_PI) * params.azimuth_bins;
    double el_coord = (q.z() / rlen + 1.0) / 2.0 * params.elevation_bins;
    double rad_coord = clampd(nb.distance / radius, 0.0, 1.0) * params.radial_bins;
    double cosn = clampd(n_seed.dot(normals[nb.vertex]), -1.0, 1.0);
    double cos_coord = (cosn + 1.0) / 2.0 * params.cosine_bins;

    int a0, a1, e0, e1, r0, r1, c0, c1;
    double aw, ew, rw, cw;
    detail::soft_bin(az_coord, params.azimuth_bins, true, &a0, &a1, &aw);
    detail::soft_bin(el_coord, params.elevation_bins, false, &e0, &e1, &ew);
    detail::soft_bin(rad_coord, params.radial_bins, false, &r0, &r1, &rw);
    detail::soft_bin(cos_coord, params.cosine_bins, false, &c0, &c1, &cw);

    const int as[2] = {a0, a1};
    const int es[2] = {e0, e1};
    const int rs[2] = {r0, r1};
    const int cs[2] = {c0, c1};
    const double ws_a[2] = {1.0 - aw, aw};
    const double ws_e[2] = {1.0 - ew, ew};
    const double ws_r[2] = {1.0 - rw, rw};
    const double ws_c[2] = {1.0 - cw, cw};
    for (int ia = 0; ia < 2; ++ia)
      for (int ie = 0; ie < 2; ++ie)
        for (int ir = 0; ir < 2; ++ir)
          for (int ic = 0; ic < 2; ++ic) {
            double w = ws_a[ia] * ws_e[ie] * ws_r[ir] * ws_c[ic];
            if (w <= 0) continue;
            int idx = ((as[ia] * params.elevation_bins + es[ie]) * params.radial_bins +
                       rs[ir]) * caz + cs[ic];
            (void)cel;
            desc[idx] += float(w);
          }
  }

  double norm = 0;
  for (float v : desc) norm += double(v) * v;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& v : desc) v = float(v / norm);
  return desc;
}

// Unit (or flagged-zero) descriptors for a set of frames.
struct ShotTable {
  std::vector<int> frames;  // sampled frame ids, ascending
  int dim = 0;
  double radius = 0;
  // desc[i] holds vertex-major descriptors for frames[i]
  std::vector<std::vector<float>> desc;

  int frame_index(int t) const {
    // nearest sampled frame; ties toward the earlier one
    int best = 0;
    int bestd = std::abs(frames[0] - t);
    for (int i = 1; i < int(frames.size()); ++i) {
      int d = std::abs(frames[i] - t);
      if (d < bestd) {
        bestd = d;
        best = i;
      }
    }
    return best;
  }

  const float* at(int frame_idx, int vertex) const {
    return &desc[frame_idx][size_t(vertex) * dim];
  }
};

inline ShotTable build_shot_table(const MeshSequence& seq,
                                  const std::vector<int>& sampled_frames,
                                  double radius, const ShotParams& params = {}) {
  ShotTable table;
  table.frames = sampled_frames;
  table.dim = params.dim();
  table.radius = radius;
  table.desc.resize(sampled_frames.size());
  VertexGraph graph(seq.base);
  const int V = seq.base.vertex_count();
  for (size_t i = 0; i < sampled_frames.size(); ++i) {
    const auto& pos = seq.frame_positions[sampled_frames[i]];
    auto normals = vertex_normals_area_weighted(pos, seq.base.faces);
    table.desc[i].assign(size_t(V) * table.dim, 0.f);
#pragma omp parallel for schedule(dynamic, 16)
    for (int v = 0; v < V; ++v) {
      auto hood = geodesic_neighborhood(graph, pos, v, radius);
      auto d = compute_shot(pos, normals, hood, v, radius, params);
      std::copy(d.begin(), d.end(), table.desc[i].begin() + size_t(v) * table.dim);
    }
  }
  return table;
}

// Component-wise median over the 1-ring (including the vertex itself),
// then renormalized. Flagged zero descriptors stay zero contributors but
// are filtered like any other value.
inline ShotTable median_filter_descriptors(const ShotTable& table, const TriMesh& mesh) {
  ShotTable out = table;
  auto rings = vertex_ring_lists(mesh);
  const int V = mesh.vertex_count();
  const int D = table.dim;
  for (size_t i = 0; i < table.desc.size(); ++i) {
    const auto& src = table.desc[i];
    auto& dst = out.desc[i];
#pragma omp parallel for schedule(dynamic, 16)
    for (int v = 0; v < V; ++v) {
      std::vector<int> members = rings[v];
      members.push_back(v);
      std::vector<float> vals(members.size());
      double norm = 0;
      for (int d = 0; d < D; ++d) {
        for (size_t m = 0; m < members.size(); ++m)
          vals[m] = src[size_t(members[m]) * D + d];
        std::sort(vals.begin(), vals.end());
        size_t n = vals.size();
        float med = (n % 2 == 1) ? vals[n / 2] : 0.5f * (vals[n / 2 - 1] + vals[n / 2]);
        dst[size_t(v) * D + d] = med;
        norm += double(med) * med;
      }
      norm = std::sqrt(norm);
      if (norm > 0)
        for (int d = 0; d < D; ++d) dst[size_t(v) * D + d] = float(dst[size_t(v) * D + d] / norm);
    }
  }
  return out;
}

}  // namespace textvol
