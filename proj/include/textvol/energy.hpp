#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "textvol/shot.hpp"
#include "textvol/ssim.hpp"
#include "textvol/texcoord.hpp"

namespace textvol {

struct Params {
  double omega_g = 0.9;   // global vs local geometry mix
  double omega_s = 10.0;  // spatial smoothness weight
  double omega_t = 2.0;   // temporal smoothness weight
  double lambda = 1.0;    // overall smoothness scale
  double theta_b = 20.0;  // blur threshold (px of coordinate motion)
  double theta_n = 0.3;   // view-angle threshold on 1 - n.c
  double theta_omega = 0.95;  // SSIM threshold for selective weighting

  void validate() const {
    if (omega_g < 0 || omega_g > 1) throw ConfigError("omega_g must be in [0,1]");
    if (theta_omega <= 0 || theta_omega > 1) throw ConfigError("theta_omega must be in (0,1]");
    if (omega_s < 0 || omega_t < 0 || lambda < 0) throw ConfigError("weights must be >= 0");
  }
};

// Inclusive step: 1 iff a >= theta.
inline int step(double a, double theta) { return a >= theta ? 1 : 0; }

// Per-face candidate label sets: the frames where the face is visible.
struct CandidateSets {
  std::vector<std::vector<int>> frames;  // ascending

  int index_of(int f, int label) const {
    const auto& L = frames[f];
    auto it = std::lower_bound(L.begin(), L.end(), label);
    if (it == L.end() || *it != label) return -1;
    return int(it - L.begin());
  }

  std::vector<int> empty_faces() const {
    std::vector<int> out;
    for (int f = 0; f < int(frames.size()); ++f)
      if (frames[f].empty()) out.push_back(f);
    return out;
  }

  static CandidateSets from_visibility(const VisibilityData& vis,
                                       const std::vector<uint8_t>& holdout = {}) {
    CandidateSets cand;
    const int T = int(vis.face_visible.size());
    const int F = T > 0 ? int(vis.face_visible[0].size()) : 0;
    cand.frames.resize(F);
    for (int t = 0; t < T; ++t) {
      if (!holdout.empty() && holdout[t]) continue;
      for (int f = 0; f < F; ++f)
        if (vis.face_visible[t][f]) cand.frames[f].push_back(t);
    }
    return cand;
  }
};

// Texture quality: penalizes fast coordinate motion around the source
// frame (motion blur proxy) and grazing view angles. Returns {0,1,2}.
inline int quality_term(int f, int label, const TexCoordTable& table, const MeshSequence& seq,
                        const Params& params) {
  const auto& tri = seq.base.faces[f];
  const int T = seq.frame_count();
  int other = label + 1 <= T - 1 ? label + 1 : label - 1;
  int blur = 0;
  if (other >= 0) {
    double sum = 0;
    int n = 0;
    for (int k = 0; k < 3; ++k) {
      if (!table.has(tri[k], label) || !table.has(tri[k], other)) {
        n = 0;
        break;
      }
      sum += (table.coord(tri[k], label) - table.coord(tri[k], other)).norm();
      ++n;
    }
    if (n == 3) blur = step(sum / 3.0, params.theta_b);
  }
  const auto& pos = seq.frame_positions[label];
  Vec3 n_face = face_normal(pos, tri);
  Vec3 centroid = face_centroid(pos, tri);
  Vec3 to_cam = -centroid.normalized();  // camera sits at the origin
  int slant = step(1.0 - n_face.dot(to_cam), params.theta_n);
  return blur + slant;
}

// Global geometric dissimilarity between the poses at t and l: clipped
// depth residual of the rigidly aligned meshes over their union footprint
// on frame l's image. 0 = identical, 1 = disjoint/degenerate.
inline double global_similarity(int t, int l, const MeshSequence& seq, const Camera& cam,
                                double inlier_threshold, uint64_t seed,
                                int correspondence_cap = 300) {
  const auto& src = seq.frame_positions[t];
  const auto& dst = seq.frame_positions[l];
  RigidTransform K;
  try {
    if (correspondence_cap > 0 && int(src.size()) > correspondence_cap) {
      int stride = (int(src.size()) + correspondence_cap - 1) / correspondence_cap;
      std::vector<Vec3> s, d;
      for (size_t i = 0; i < src.size(); i += stride) {
        s.push_back(src[i]);
        d.push_back(dst[i]);
      }
      K = estimate_rigid_alignment(s, d, inlier_threshold, mix_seed(seed, {uint64_t(t), uint64_t(l)}));
    } else {
      K = estimate_rigid_alignment(src, dst, inlier_threshold,
                                   mix_seed(seed, {uint64_t(t), uint64_t(l)}));
    }
  } catch (const ContractError&) {
    return 1.0;
  }
  std::vector<Vec3> moved(src.size());
  for (size_t i = 0; i < src.size(); ++i) moved[i] = K.apply(src[i]);
  DepthIdMap ra = render_depth(moved, seq.base.faces, cam);
  DepthIdMap rb = render_depth(dst, seq.base.faces, cam);
  double sum = 0;
  long unions = 0;
  for (size_t i = 0; i < ra.depth.size(); ++i) {
    bool ha = std::isfinite(ra.depth[i]);
    bool hb = std::isfinite(rb.depth[i]);
    if (!ha && !hb) continue;
    ++unions;
    if (ha && hb)
      sum += std::min(1.0, std::abs(double(ra.depth[i]) - double(rb.depth[i])));
    else
      sum += 1.0;
  }
  if (unions == 0) return 1.0;
  return sum / double(unions);
}

struct GlobalSimilarityMatrix {
  int T = 0;
  std::vector<float> values;  // T*T

  double at(int t, int l) const { return values[size_t(t) * T + l]; }
};

inline GlobalSimilarityMatrix build_global_similarity(const MeshSequence& seq,
                                                      const Camera& cam,
                                                      double inlier_threshold,
                                                      uint64_t seed) {
  GlobalSimilarityMatrix m;
  m.T = seq.frame_count();
  m.values.assign(size_t(m.T) * m.T, 0.f);
#pragma omp parallel for schedule(dynamic, 4)
  for (int idx = 0; idx < m.T * m.T; ++idx) {
    int t = idx / m.T, l = idx % m.T;
    m.values[idx] = float(global_similarity(t, l, seq, cam, inlier_threshold, seed));
  }
  return m;
}

// Pairwise descriptor dot products per vertex over the sampled frames,
// so local similarity lookups are O(1) for any (t, l).
struct VertexDotTable {
  int S = 0;
  std::vector<int> frame_to_sample;  // t -> sampled index
  std::vector<float> dots;           // v*S*S

  double at(int vert, int t, int l) const {
    return dots[(size_t(vert) * S + frame_to_sample[t]) * S + frame_to_sample[l]];
  }
};

inline VertexDotTable build_vertex_dots(const ShotTable& shot, int V, int T) {
  VertexDotTable table;
  table.S = int(shot.frames.size());
  table.frame_to_sample.resize(T);
  for (int t = 0; t < T; ++t) table.frame_to_sample[t] = shot.frame_index(t);
  table.dots.assign(size_t(V) * table.S * table.S, 0.f);
  const int D = shot.dim;
#pragma omp parallel for schedule(dynamic, 16)
  for (int v = 0; v < V; ++v) {
    for (int i = 0; i < table.S; ++i)
      for (int j = 0; j < table.S; ++j) {
        const float* a = shot.at(i, v);
        const float* b = shot.at(j, v);
        double dot = 0;
        for (int d = 0; d < D; ++d) dot += double(a[d]) * b[d];
        table.dots[(size_t(v) * table.S + i) * table.S + j] = float(dot);
      }
  }
  return table;
}

// Negative mean descriptor agreement of the face's vertices between the
// poses at t and l. Flagged (zero) descriptors contribute 0.
inline double local_similarity(int f, int t, int l, const TriMesh& mesh,
                               const VertexDotTable& dots) {
  const auto& tri = mesh.faces[f];
  double sum = 0;
  for (int k = 0; k < 3; ++k) sum += dots.at(tri[k], t, l);
  return -sum / 3.0;
}

// Interior sample pattern for temporal comparisons: nu x nv grid folded
// into the triangle.
inline std::vector<std::array<double, 3>> face_sample_barys_rect(int nu, int nv) {
  std::vector<std::array<double, 3>> barys;
  barys.reserve(size_t(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      double a = (i + 0.5) / nu, b = (j + 0.5) / nv;
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      barys.push_back({1.0 - a - b, a, b});
    }
  return barys;
}

// Color + gradient disagreement along the shared edge of two faces when
// each samples its own label's image. Mean over edge samples.
inline double spatial_smoothness(int f0, int f1, int l0, int l1, const TriMesh& mesh,
                                 const TexCoordTable& table, const FrameStream& stream,
                                 const std::vector<Image>& grad_images, int n_samples = 16) {
  auto [va, vb] = mesh.shared_edge(f0, f1);
  double acc = 0;
  for (int k = 0; k < n_samples; ++k) {
    double s = (k + 0.5) / n_samples;
    Vec2 p0 = (1 - s) * table.coord(va, l0) + s * table.coord(vb, l0);
    Vec2 p1 = (1 - s) * table.coord(va, l1) + s * table.coord(vb, l1);
    float c0[3], c1[3];
    stream.colors[l0].sample_rgb(p0.x(), p0.y(), c0);
    stream.colors[l1].sample_rgb(p1.x(), p1.y(), c1);
    double color = std::abs(double(c0[0]) - c1[0]) + std::abs(double(c0[1]) - c1[1]) +
                   std::abs(double(c0[2]) - c1[2]);
    double g0 = grad_images[l0].sample(p0.x(), p0.y());
    double g1 = grad_images[l1].sample(p1.x(), p1.y());
    acc += color + std::abs(g0 - g1);
  }
  return acc / n_samples;
}

// Color disagreement of the face interior between two labels. Mean over
// barycentric samples.
inline double temporal_smoothness(int f, int l0, int l1, const TriMesh& mesh,
                                  const TexCoordTable& table, const FrameStream& stream,
                                  const std::vector<std::array<double, 3>>& barys) {
  const auto& tri = mesh.faces[f];
  double acc = 0;
  for (const auto& b : barys) {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    for (int k = 0; k < 3; ++k) {
      x0 += b[k] * table.u[table.idx(tri[k], l0)];
      y0 += b[k] * table.v[table.idx(tri[k], l0)];
      x1 += b[k] * table.u[table.idx(tri[k], l1)];
      y1 += b[k] * table.v[table.idx(tri[k], l1)];
    }
    float c0[3], c1[3];
    stream.colors[l0].sample_rgb(x0, y0, c0);
    stream.colors[l1].sample_rgb(x1, y1, c1);
    acc += std::abs(double(c0[0]) - c1[0]) + std::abs(double(c0[1]) - c1[1]) +
           std::abs(double(c0[2]) - c1[2]);
  }
  return acc / double(barys.size());
}

// Selective weighting (temporal): drop the smoothness cost inside
// low-correlation (dynamic) episodes.
inline double selective_temporal(double e_temp, double s_l0, double s_l1, double theta_omega) {
  return e_temp * step(std::min(s_l0, s_l1), theta_omega);
}

// Selective weighting (spatial): boost coherence where either face has a
// dynamic episode anywhere in its candidate set. Multiplier in {1,1.5,2}.
inline double selective_spatial(double e_spa, double s_min_f0, double s_min_f1,
                                double theta_omega) {
  double mult = 2.0 - (step(s_min_f0, theta_omega) + step(s_min_f1, theta_omega)) / 2.0;
  return e_spa * mult;
}

// Luma slices of the atlas built by direct projection (label = own frame),
// with per-slice coverage. Input to the SSIM table.
struct PartialVolume {
  int size = 0;
  std::vector<uint8_t> present;         // [t] slice exists
  std::vector<Image> luma_slices;       // [t]
  std::vector<std::vector<uint8_t>> coverage;  // [t][texel]
};

inline PartialVolume build_partial_volume(const TriMesh& mesh, const AtlasLayout& layout,
                                          const TexCoordTable& table,
                                          const FrameStream& stream,
                                          const VisibilityData& vis,
                                          const std::vector<uint8_t>& holdout = {}) {
  PartialVolume pv;
  pv.size = layout.size;
  const int T = int(vis.face_visible.size());
  pv.present.assign(T, 0);
  pv.luma_slices.resize(T);
  pv.coverage.resize(T);
  std::vector<Image8> padded = stream.padded_colors();
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T; ++t) {
    if (!holdout.empty() && holdout[t]) continue;
    pv.present[t] = 1;
    pv.luma_slices[t] = Image(layout.size, layout.size, 1);
    pv.coverage[t].assign(size_t(layout.size) * layout.size, 0);
    for (int f = 0; f < mesh.face_count(); ++f) {
      if (!vis.face_visible[t][f]) continue;
      const auto& tri = mesh.faces[f];
      for (int texel : layout.face_texels[f]) {
        const float* b = &layout.bary[size_t(texel) * 3];
        double px = b[0] * table.u[table.idx(tri[0], t)] +
                    b[1] * table.u[table.idx(tri[1], t)] +
                    b[2] * table.u[table.idx(tri[2], t)];
        double py = b[0] * table.v[table.idx(tri[0], t)] +
                    b[1] * table.v[table.idx(tri[1], t)] +
                    b[2] * table.v[table.idx(tri[2], t)];
        float rgb[3];
        padded[t].sample_rgb(px, py, rgb);
        pv.luma_slices[t].data[texel] =
            0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
        pv.coverage[t][texel] = 1;
      }
    }
  }
  return pv;
}

// S(f,t) = mean SSIM of face f's texels between slices t and t+1;
// undefined entries (invisible, boundary, held-out) default to 1.
struct SsimTable {
  std::vector<std::vector<float>> S;  // [f][t]
  std::vector<float> S_min;           // per face, min over candidate frames

  double at(int f, int t) const { return S[f][t]; }
};

inline SsimTable ssim_table(const PartialVolume& pv, const TriMesh& mesh,
                            const AtlasLayout& layout, const CandidateSets& cand,
                            int window = 11) {
  SsimTable out;
  const int T = int(pv.present.size());
  const int F = mesh.face_count();
  out.S.assign(F, std::vector<float>(T, 1.f));
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T - 1; ++t) {
    if (!pv.present[t] || !pv.present[t + 1]) continue;
    std::vector<uint8_t> valid;
    Image map = masked_ssim_map(pv.luma_slices[t], pv.luma_slices[t + 1], pv.coverage[t],
                                pv.coverage[t + 1], window, &valid);
    for (int f = 0; f < F; ++f) {
      double acc = 0;
      int n = 0;
      for (int texel : layout.face_texels[f]) {
        if (!valid[texel]) continue;
        acc += map.data[texel];
        ++n;
      }
      if (n > 0) out.S[f][t] = float(acc / n);
    }
  }
  out.S_min.assign(F, 1.f);
  for (int f = 0; f < F; ++f) {
    float mn = 1.f;
    for (int l : cand.frames[f]) mn = std::min(mn, out.S[f][l]);
    out.S_min[f] = mn;
  }
  return out;
}

// Frozen cost tables the solver consumes. Pairwise costs do not depend on
// the frame index of the node, only on the two labels, so spatial tables
// are shared across time and temporal tables across all (t, t+1) pairs.
struct CostTables {
  Params params;
  CandidateSets cand;
  int F = 0, T = 0;

  std::vector<std::vector<float>> unary;  // [f]: t * |L_f| + li
  std::vector<std::vector<float>> qual;   // [f]: |L_f| (E_qual component)
  GlobalSimilarityMatrix eglo;
  VertexDotTable vdots;                    // empty when local term disabled
  bool has_local = false;

  struct EdgeTable {
    int f0 = 0, f1 = 0;
    std::vector<float> cost;  // |L_f0| x |L_f1| raw spatial smoothness
    float mult = 1.f;         // selective spatial multiplier
  };
  std::vector<EdgeTable> edges;
  std::vector<std::vector<std::pair<int, int>>> face_edges;  // f -> (edge id, side)

  std::vector<std::vector<float>> temp;  // [f]: |L_f|^2, selective-weighted
  SsimTable ssim;

  double unary_at(int f, int t, int li) const {
    return unary[f][size_t(t) * cand.frames[f].size() + li];
  }
  double spatial_at(int e, int li0, int li1) const {
    return edges[e].cost[size_t(li0) * cand.frames[edges[e].f1].size() + li1];
  }
  double temporal_at(int f, int li0, int li1) const {
    return temp[f][size_t(li0) * cand.frames[f].size() + li1];
  }
};

// Data cost per Eq(uation)-of-record composition: quality + weighted
// global/local geometric dissimilarity. +inf for labels outside L_f.
inline double data_cost(int f, int t, int label, const CostTables& tables) {
  int li = tables.cand.index_of(f, label);
  if (li < 0) return kInf;
  return tables.unary_at(f, t, li);
}

struct CostBuildOptions {
  int edge_samples = 16;
  int face_samples_u = 8;
  int face_samples_v = 4;  // 8x4 = 32 interior samples
  int ssim_window = 11;
  int prune = 40;            // 0 = disabled
  uint64_t seed = 1;
  double ransac_inlier_m = 0.01;
  bool enable_quality = true;    // ablation knob
  bool selective_weighting = true;
  bool enable_local = true;
  int shot_stride = 4;           // descriptor sampling stride
  double shot_radius_factor = 5.0;
};

inline CostTables build_cost_tables(const MeshSequence& seq, const FrameStream& stream,
                                    const TexCoordTable& table, const VisibilityData& vis,
                                    const AtlasLayout& layout, const Params& params,
                                    const CostBuildOptions& opts,
                                    const std::vector<uint8_t>& holdout = {}) {
  params.validate();
  CostTables tables;
  tables.params = params;
  tables.F = seq.base.face_count();
  tables.T = seq.frame_count();
  tables.cand = CandidateSets::from_visibility(vis, holdout);

  auto empty = tables.cand.empty_faces();
  if (!empty.empty()) {
    std::string msg = "faces with empty candidate sets:";
    for (size_t i = 0; i < empty.size() && i < 16; ++i)
      msg += " " + std::to_string(empty[i]);
    if (empty.size() > 16) msg += " ... (" + std::to_string(empty.size()) + " total)";
    throw ContractError(msg);
  }

  const TriMesh& mesh = seq.base;

  tables.eglo = build_global_similarity(seq, stream.camera, opts.ransac_inlier_m, opts.seed);

  if (opts.enable_local) {
    std::vector<int> shot_frames;
    for (int t = 0; t < tables.T; t += std::max(1, opts.shot_stride)) shot_frames.push_back(t);
    double radius =
        opts.shot_radius_factor * mean_edge_length(mesh.vertices, mesh.faces);
    ShotTable shot = build_shot_table(seq, shot_frames, radius);
    shot = median_filter_descriptors(shot, mesh);
    tables.vdots = build_vertex_dots(shot, mesh.vertex_count(), tables.T);
    tables.has_local = true;
  }

  // per-face quality and unary assembly
  tables.qual.resize(tables.F);
  tables.unary.resize(tables.F);
#pragma omp parallel for schedule(dynamic, 16)
  for (int f = 0; f < tables.F; ++f) {
    const auto& L = tables.cand.frames[f];
    tables.qual[f].resize(L.size());
    for (size_t li = 0; li < L.size(); ++li)
      tables.qual[f][li] =
          opts.enable_quality ? float(quality_term(f, L[li], table, seq, params)) : 0.f;
    tables.unary[f].assign(size_t(tables.T) * L.size(), 0.f);
    for (int t = 0; t < tables.T; ++t)
      for (size_t li = 0; li < L.size(); ++li) {
        double e = tables.qual[f][li] + params.omega_g * tables.eglo.at(t, L[li]);
        if (tables.has_local)
          e += (1.0 - params.omega_g) * local_similarity(f, t, L[li], mesh, tables.vdots);
        tables.unary[f][size_t(t) * L.size() + li] = float(e);
      }
  }

  // candidate pruning by mean-over-time data cost
  if (opts.prune > 0) {
    for (int f = 0; f < tables.F; ++f) {
      auto& L = tables.cand.frames[f];
      if (int(L.size()) <= opts.prune) continue;
      std::vector<std::pair<double, int>> scored(L.size());
      for (size_t li = 0; li < L.size(); ++li) {
        double mean = 0;
        for (int t = 0; t < tables.T; ++t) mean += tables.unary[f][size_t(t) * L.size() + li];
        scored[li] = {mean / tables.T, int(li)};
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<int> keep;
      for (int i = 0; i < opts.prune; ++i) keep.push_back(scored[i].second);
      std::sort(keep.begin(), keep.end());
      std::vector<int> new_L;
      std::vector<float> new_unary(size_t(tables.T) * keep.size());
      std::vector<float> new_qual(keep.size());
      for (size_t k = 0; k < keep.size(); ++k) {
        new_L.push_back(L[keep[k]]);
        new_qual[k] = tables.qual[f][keep[k]];
        for (int t = 0; t < tables.T; ++t)
          new_unary[size_t(t) * keep.size() + k] = tables.unary[f][size_t(t) * L.size() + keep[k]];
      }
      L = std::move(new_L);
      tables.qual[f] = std::move(new_qual);
      tables.unary[f] = std::move(new_unary);
    }
  }

  // SSIM table over the direct-projection partial volume
  PartialVolume pv = build_partial_volume(mesh, layout, table, stream, vis, holdout);
  tables.ssim = ssim_table(pv, mesh, layout, tables.cand, opts.ssim_window);

  // gradient-magnitude images for the spatial term
  std::vector<Image> grads(tables.T);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < tables.T; ++t) grads[t] = gradient_magnitude(luma(stream.colors[t]));

  // spatial edge tables (shared across frames)
  tables.edges.resize(mesh.face_adjacency.size());
  tables.face_edges.resize(tables.F);
  for (size_t e = 0; e < mesh.face_adjacency.size(); ++e) {
    tables.edges[e].f0 = mesh.face_adjacency[e].first;
    tables.edges[e].f1 = mesh.face_adjacency[e].second;
    tables.face_edges[tables.edges[e].f0].push_back({int(e), 0});
    tables.face_edges[tables.edges[e].f1].push_back({int(e), 1});
  }
#pragma omp parallel for schedule(dynamic, 4)
  for (int e = 0; e < int(tables.edges.size()); ++e) {
    auto& et = tables.edges[e];
    const auto& L0 = tables.cand.frames[et.f0];
    const auto& L1 = tables.cand.frames[et.f1];
    auto [va, vb] = mesh.shared_edge(et.f0, et.f1);
    // per-label edge samples, then all pair combinations
    auto sample_edge = [&](int l, std::vector<float>& rgb, std::vector<float>& g) {
      rgb.resize(size_t(opts.edge_samples) * 3);
      g.resize(opts.edge_samples);
      for (int k = 0; k < opts.edge_samples; ++k) {
        double s = (k + 0.5) / opts.edge_samples;
        double px = (1 - s) * table.u[table.idx(va, l)] + s * table.u[table.idx(vb, l)];
        double py = (1 - s) * table.v[table.idx(va, l)] + s * table.v[table.idx(vb, l)];
        stream.colors[l].sample_rgb(px, py, &rgb[size_t(k) * 3]);
        g[k] = grads[l].sample(px, py);
      }
    };
    std::vector<std::vector<float>> rgb0(L0.size()), g0(L0.size());
    std::vector<std::vector<float>> rgb1(L1.size()), g1(L1.size());
    for (size_t i = 0; i < L0.size(); ++i) sample_edge(L0[i], rgb0[i], g0[i]);
    for (size_t i = 0; i < L1.size(); ++i) sample_edge(L1[i], rgb1[i], g1[i]);
    et.cost.assign(L0.size() * L1.size(), 0.f);
    for (size_t i = 0; i < L0.size(); ++i)
      for (size_t j = 0; j < L1.size(); ++j) {
        double acc = 0;
        for (int k = 0; k < opts.edge_samples; ++k) {
          const float* ca = &rgb0[i][size_t(k) * 3];
          const float* cb = &rgb1[j][size_t(k) * 3];
          acc += std::abs(double(ca[0]) - cb[0]) + std::abs(double(ca[1]) - cb[1]) +
                 std::abs(double(ca[2]) - cb[2]) + std::abs(double(g0[i][k]) - g1[j][k]);
        }
        et.cost[i * L1.size() + j] = float(acc / opts.edge_samples);
      }
    et.mult = opts.selective_weighting
                  ? float(2.0 - (step(tables.ssim.S_min[et.f0], params.theta_omega) +
                                 step(tables.ssim.S_min[et.f1], params.theta_omega)) /
                                    2.0)
                  : 1.f;
  }

  // temporal tables (selective-weighted; shared across (t, t+1) pairs)
  auto barys = face_sample_barys_rect(opts.face_samples_u, opts.face_samples_v);
  tables.temp.resize(tables.F);
#pragma omp parallel for schedule(dynamic, 8)
  for (int f = 0; f < tables.F; ++f) {
    const auto& L = tables.cand.frames[f];
    const auto& tri = mesh.faces[f];
    std::vector<std::vector<float>> rgb(L.size());
    for (size_t i = 0; i < L.size(); ++i) {
      rgb[i].resize(barys.size() * 3);
      for (size_t s = 0; s < barys.size(); ++s) {
        const auto& b = barys[s];
        double px = b[0] * table.u[table.idx(tri[0], L[i])] +
                    b[1] * table.u[table.idx(tri[1], L[i])] +
                    b[2] * table.u[table.idx(tri[2], L[i])];
        double py = b[0] * table.v[table.idx(tri[0], L[i])] +
                    b[1] * table.v[table.idx(tri[1], L[i])] +
                    b[2] * table.v[table.idx(tri[2], L[i])];
        stream.colors[L[i]].sample_rgb(px, py, &rgb[i][s * 3]);
      }
    }
    tables.temp[f].assign(L.size() * L.size(), 0.f);
    for (size_t i = 0; i < L.size(); ++i)
      for (size_t j = 0; j < L.size(); ++j) {
        double acc = 0;
        for (size_t s = 0; s < barys.size(); ++s) {
          const float* ca = &rgb[i][s * 3];
          const float* cb = &rgb[j][s * 3];
          acc += std::abs(double(ca[0]) - cb[0]) + std::abs(double(ca[1]) - cb[1]) +
                 std::abs(double(ca[2]) - cb[2]);
        }
        double raw = acc / double(barys.size());
        double sel = opts.selective_weighting
                         ? selective_temporal(raw, tables.ssim.S[f][L[i]],
                                              tables.ssim.S[f][L[j]], params.theta_omega)
                         : raw;
        tables.temp[f][i * L.size() + j] = float(sel);
      }
  }

  return tables;
}

// Total labeling energy: unary everywhere plus each undirected spatial and
// temporal edge once.
inline double total_energy(const std::vector<std::vector<int>>& labels,
                           const CostTables& tables) {
  const Params& p = tables.params;
  double total = 0;
  for (int f = 0; f < tables.F; ++f) {
    const auto& L = tables.cand.frames[f];
    for (int t = 0; t < tables.T; ++t) {
      int li = tables.cand.index_of(f, labels[f][t]);
      if (li < 0) throw ContractError("total_energy: label outside candidate set");
      total += tables.unary[f][size_t(t) * L.size() + li];
    }
  }
  for (size_t e = 0; e < tables.edges.size(); ++e) {
    const auto& et = tables.edges[e];
    for (int t = 0; t < tables.T; ++t) {
      int li0 = tables.cand.index_of(et.f0, labels[et.f0][t]);
      int li1 = tables.cand.index_of(et.f1, labels[et.f1][t]);
      total += p.lambda * p.omega_s * et.mult * tables.spatial_at(int(e), li0, li1);
    }
  }
  for (int f = 0; f < tables.F; ++f) {
    for (int t = 0; t + 1 < tables.T; ++t) {
      int li0 = tables.cand.index_of(f, labels[f][t]);
      int li1 = tables.cand.index_of(f, labels[f][t + 1]);
      total += p.lambda * p.omega_t * tables.temporal_at(f, li0, li1);
    }
  }
  return total;
}

// Energy change from flipping one node's label; matches total_energy
// recomputation exactly.
inline double energy_delta(const std::vector<std::vector<int>>& labels, int f, int t,
                           int new_label, const CostTables& tables) {
  const Params& p = tables.params;
  const auto& L = tables.cand.frames[f];
  int li_old = tables.cand.index_of(f, labels[f][t]);
  int li_new = tables.cand.index_of(f, new_label);
  if (li_new < 0) return kInf;
  double delta = double(tables.unary[f][size_t(t) * L.size() + li_new]) -
                 double(tables.unary[f][size_t(t) * L.size() + li_old]);
  for (auto [e, side] : tables.face_edges[f]) {
    const auto& et = tables.edges[e];
    int other_f = side == 0 ? et.f1 : et.f0;
    int lo = tables.cand.index_of(other_f, labels[other_f][t]);
    double w = p.lambda * p.omega_s * et.mult;
    if (side == 0)
      delta += w * (tables.spatial_at(e, li_new, lo) - tables.spatial_at(e, li_old, lo));
    else
      delta += w * (tables.spatial_at(e, lo, li_new) - tables.spatial_at(e, lo, li_old));
  }
  if (t > 0) {
    int lp = tables.cand.index_of(f, labels[f][t - 1]);
    delta += p.lambda * p.omega_t *
             (tables.temporal_at(f, lp, li_new) - tables.temporal_at(f, lp, li_old));
  }
  if (t + 1 < tables.T) {
    int ln = tables.cand.index_of(f, labels[f][t + 1]);
    delta += p.lambda * p.omega_t *
             (tables.temporal_at(f, li_new, ln) - tables.temporal_at(f, li_old, ln));
  }
  return delta;
}

}  // namespace textvol
