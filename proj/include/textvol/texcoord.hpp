#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "textvol/geometry.hpp"

namespace textvol {

struct TexCoordParams {
  int sample_stride = 4;
  int iters_sampled = 20;
  int iters_full = 3;
  int gd_steps = 10;
  double gd_step_px = 0.5;
  int proxy_res = 8;        // proxy_res^2 barycentric samples per face
  double delta_fg = 0.020;  // m, foreground depth agreement
  double w_bg = 0.05;       // weight for background samples
  double delta_occ = 0.005; // m, occlusion tolerance
};

// Per-frame face/vertex visibility plus foreground weight masks.
struct VisibilityData {
  std::vector<std::vector<uint8_t>> face_visible;  // [t][f]
  std::vector<std::vector<uint8_t>> vert_visible;  // [t][v]
  std::vector<Image> masks;                        // [t], 1 channel, {w_bg, 1}
};

// Weight 1 where the sensor depth agrees with the rendered model depth,
// w_bg elsewhere (including invalid sensor pixels and off-model pixels).
inline Image foreground_mask(const std::vector<uint16_t>& depth_mm, const Camera& cam,
                             const DepthIdMap& render, double delta_fg, double w_bg) {
  Image mask(cam.width, cam.height, 1, float(w_bg));
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      uint16_t mm = depth_mm[size_t(y) * cam.width + x];
      if (mm == 0) continue;
      float rendered = render.depth_at(x, y);
      if (!std::isfinite(rendered)) continue;
      if (std::abs(double(mm) / 1000.0 - rendered) <= delta_fg) mask.at(x, y) = 1.f;
    }
  }
  return mask;
}

// Convenience overload matching the one-shot call shape.
inline Image foreground_mask(const std::vector<uint16_t>& depth_mm, const Camera& cam,
                             const std::vector<Vec3>& mesh_frame,
                             const std::vector<std::array<int, 3>>& faces,
                             double delta_fg, double w_bg) {
  return foreground_mask(depth_mm, cam, render_depth(mesh_frame, faces, cam), delta_fg,
                         w_bg);
}

inline VisibilityData compute_visibility(const MeshSequence& seq, const FrameStream& stream,
                                         const TexCoordParams& params) {
  const int T = seq.frame_count();
  const int V = seq.base.vertex_count();
  VisibilityData out;
  out.face_visible.resize(T);
  out.vert_visible.assign(T, std::vector<uint8_t>(V, 0));
  out.masks.resize(T);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T; ++t) {
    DepthIdMap render = render_depth(seq.frame_positions[t], seq.base.faces, stream.camera);
    out.face_visible[t] = face_visibility(seq.frame_positions[t], seq.base.faces,
                                          stream.camera, render, params.delta_occ);
    for (int f = 0; f < seq.base.face_count(); ++f)
      if (out.face_visible[t][f])
        for (int k = 0; k < 3; ++k) out.vert_visible[t][seq.base.faces[f][k]] = 1;
    out.masks[t] =
        foreground_mask(stream.depths[t], stream.camera, render, params.delta_fg, params.w_bg);
  }
  return out;
}

// Optimized image-space coordinates xi(v, t), defined wherever the vertex
// belongs to a visible face. phi holds the raw projections.
struct TexCoordTable {
  int V = 0, T = 0;
  std::vector<uint8_t> defined;  // t*V + v
  std::vector<double> u, v;      // coordinates (px)
  std::vector<double> phi_u, phi_v;

  size_t idx(int vert, int t) const { return size_t(t) * V + vert; }
  bool has(int vert, int t) const { return defined[idx(vert, t)] != 0; }
  Vec2 coord(int vert, int t) const {
    size_t i = idx(vert, t);
    return Vec2(u[i], v[i]);
  }
  Vec2 phi(int vert, int t) const {
    size_t i = idx(vert, t);
    return Vec2(phi_u[i], phi_v[i]);
  }
  Vec2 displacement(int vert, int t) const { return coord(vert, t) - phi(vert, t); }
};

// Triangle sample pattern: res x res grid points folded into the triangle.
inline std::vector<std::array<double, 3>> face_sample_barys(int res) {
  std::vector<std::array<double, 3>> barys;
  barys.reserve(size_t(res) * res);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      double a = (i + 0.5) / res, b = (j + 0.5) / res;
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      barys.push_back({1.0 - a - b, a, b});
    }
  }
  return barys;
}

// Per-face texel grid of weighted mean colors over the frames in `frame_set`.
struct ProxyColors {
  int samples = 0;
  std::vector<std::array<double, 3>> bary;
  std::vector<float> rgb;      // F * samples * 3
  std::vector<uint8_t> valid;  // F
};

namespace detail {

// Color and foreground weight fused into one interleaved float image so
// one coordinate setup serves all four channels in the hot loops.
struct SampledFrame {
  int width = 0, height = 0;
  std::vector<float> rgbw;

  static SampledFrame build(const Image8& color, const Image& mask) {
    SampledFrame out;
    out.width = color.width;
    out.height = color.height;
    out.rgbw.resize(size_t(out.width) * out.height * 4);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        size_t i = (size_t(y) * out.width + x) * 4;
        out.rgbw[i + 0] = color.atf(x, y, 0);
        out.rgbw[i + 1] = color.atf(x, y, 1);
        out.rgbw[i + 2] = color.atf(x, y, 2);
        out.rgbw[i + 3] = mask.at(x, y);
      }
    return out;
  }

  // pixel-center convention; clamp-to-edge
  void sample4(double u, double v, float out[4]) const {
    double x = clampd(u - 0.5, 0.0, width - 1.0);
    double y = clampd(v - 0.5, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = x0 + 1 < width ? x0 + 1 : x0;
    int y1 = y0 + 1 < height ? y0 + 1 : y0;
    float fx = float(x - x0), fy = float(y - y0);
    const float* p00 = &rgbw[(size_t(y0) * width + x0) * 4];
    const float* p10 = &rgbw[(size_t(y0) * width + x1) * 4];
    const float* p01 = &rgbw[(size_t(y1) * width + x0) * 4];
    const float* p11 = &rgbw[(size_t(y1) * width + x1) * 4];
    float w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
    float w01 = (1 - fx) * fy, w11 = fx * fy;
    for (int c = 0; c < 4; ++c)
      out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
  }

  // values plus d/dx, d/dy of the rgb channels in one setup
  void sample4_grad(double u, double v, float val[4], float gx[3], float gy[3]) const {
    double x = clampd(u - 0.5, 0.0, width - 1.0);
    double y = clampd(v - 0.5, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = x0 + 1 < width ? x0 + 1 : x0;
    int y1 = y0 + 1 < height ? y0 + 1 : y0;
    float fx = float(x - x0), fy = float(y - y0);
    const float* p00 = &rgbw[(size_t(y0) * width + x0) * 4];
    const float* p10 = &rgbw[(size_t(y0) * width + x1) * 4];
    const float* p01 = &rgbw[(size_t(y1) * width + x0) * 4];
    const float* p11 = &rgbw[(size_t(y1) * width + x1) * 4];
    float w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
    float w01 = (1 - fx) * fy, w11 = fx * fy;
    for (int c = 0; c < 4; ++c)
      val[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
    for (int c = 0; c < 3; ++c) {
      gx[c] = (p10[c] - p00[c]) * (1 - fy) + (p11[c] - p01[c]) * fy;
      gy[c] = (p01[c] - p00[c]) * (1 - fx) + (p11[c] - p10[c]) * fx;
    }
  }
};

inline std::vector<SampledFrame> build_sampled_frames(const FrameStream& stream,
                                                      const VisibilityData& vis) {
  std::vector<SampledFrame> out(stream.frame_count());
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < stream.frame_count(); ++t)
    out[t] = SampledFrame::build(stream.colors[t], vis.masks[t]);
  return out;
}

struct TexOptWorkspace {
  std::vector<int> vertex_face_offsets;  // CSR over vertex -> faces
  std::vector<int> vertex_face_items;
  std::vector<int> color_class_of;  // conflict-graph coloring
  int num_classes = 0;
};

inline TexOptWorkspace build_workspace(const TriMesh& mesh) {
  TexOptWorkspace ws;
  auto vf = vertex_face_lists(mesh);
  ws.vertex_face_offsets.assign(mesh.vertex_count() + 1, 0);
  for (int v = 0; v < mesh.vertex_count(); ++v)
    ws.vertex_face_offsets[v + 1] = ws.vertex_face_offsets[v] + int(vf[v].size());
  ws.vertex_face_items.reserve(ws.vertex_face_offsets.back());
  for (const auto& lst : vf)
    for (int f : lst) ws.vertex_face_items.push_back(f);

  // vertices sharing a face must not be moved concurrently
  auto rings = vertex_ring_lists(mesh);
  ws.color_class_of.assign(mesh.vertex_count(), -1);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    uint64_t used = 0;
    for (int u : rings[v])
      if (ws.color_class_of[u] >= 0 && ws.color_class_of[u] < 64)
        used |= 1ull << ws.color_class_of[u];
    int c = 0;
    while (c < 64 && (used >> c) & 1) ++c;
    ws.color_class_of[v] = c;
    ws.num_classes = std::max(ws.num_classes, c + 1);
  }
  return ws;
}

inline double photometric_energy_fused(const TriMesh& mesh, const TexCoordTable& table,
                                       const ProxyColors& proxies,
                                       const std::vector<SampledFrame>& frames,
                                       const VisibilityData& vis,
                                       const std::vector<int>& frame_set) {
  const int F = mesh.face_count();
  std::vector<double> per_face(F, 0.0);
#pragma omp parallel for schedule(dynamic, 32)
  for (int f = 0; f < F; ++f) {
    if (!proxies.valid[f]) continue;
    const auto& tri = mesh.faces[f];
    double acc = 0;
    for (int t : frame_set) {
      if (!vis.face_visible[t][f]) continue;
      const SampledFrame& img = frames[t];
      double u0 = table.u[table.idx(tri[0], t)], v0 = table.v[table.idx(tri[0], t)];
      double u1 = table.u[table.idx(tri[1], t)], v1 = table.v[table.idx(tri[1], t)];
      double u2 = table.u[table.idx(tri[2], t)], v2 = table.v[table.idx(tri[2], t)];
      for (int s = 0; s < proxies.samples; ++s) {
        const auto& b = proxies.bary[s];
        float rgbw[4];
        img.sample4(b[0] * u0 + b[1] * u1 + b[2] * u2, b[0] * v0 + b[1] * v1 + b[2] * v2,
                    rgbw);
        const float* p = &proxies.rgb[(size_t(f) * proxies.samples + s) * 3];
        double d0 = rgbw[0] - p[0], d1 = rgbw[1] - p[1], d2 = rgbw[2] - p[2];
        acc += rgbw[3] * (d0 * d0 + d1 * d1 + d2 * d2);
      }
    }
    per_face[f] = acc;
  }
  double total = 0;
  for (double v : per_face) total += v;
  return total;
}

inline ProxyColors compute_proxies_fused(const TriMesh& mesh, const TexCoordTable& table,
                                         const std::vector<SampledFrame>& frames,
                                         const VisibilityData& vis,
                                         const std::vector<int>& frame_set, int res) {
  ProxyColors proxies;
  proxies.bary = face_sample_barys(res);
  proxies.samples = int(proxies.bary.size());
  const int F = mesh.face_count();
  proxies.rgb.assign(size_t(F) * proxies.samples * 3, 0.f);
  proxies.valid.assign(F, 0);
#pragma omp parallel for schedule(dynamic, 32)
  for (int f = 0; f < F; ++f) {
    const auto& tri = mesh.faces[f];
    bool any = false;
    for (int t : frame_set) any = any || vis.face_visible[t][f];
    if (!any) continue;
    proxies.valid[f] = 1;
    std::vector<double> acc(size_t(proxies.samples) * 4, 0.0);
    for (int t : frame_set) {
      if (!vis.face_visible[t][f]) continue;
      const SampledFrame& img = frames[t];
      double u0 = table.u[table.idx(tri[0], t)], v0 = table.v[table.idx(tri[0], t)];
      double u1 = table.u[table.idx(tri[1], t)], v1 = table.v[table.idx(tri[1], t)];
      double u2 = table.u[table.idx(tri[2], t)], v2 = table.v[table.idx(tri[2], t)];
      for (int s = 0; s < proxies.samples; ++s) {
        const auto& b = proxies.bary[s];
        float rgbw[4];
        img.sample4(b[0] * u0 + b[1] * u1 + b[2] * u2, b[0] * v0 + b[1] * v1 + b[2] * v2,
                    rgbw);
        for (int c = 0; c < 3; ++c) acc[size_t(s) * 4 + c] += double(rgbw[3]) * rgbw[c];
        acc[size_t(s) * 4 + 3] += rgbw[3];
      }
    }
    for (int s = 0; s < proxies.samples; ++s) {
      double wsum = acc[size_t(s) * 4 + 3];
      float* out = &proxies.rgb[(size_t(f) * proxies.samples + s) * 3];
      for (int c = 0; c < 3; ++c)
        out[c] = float(wsum > 0 ? acc[size_t(s) * 4 + c] / wsum : 0.0);
    }
  }
  return proxies;
}

}  // namespace detail

// Eq(uation)-of-record photometric objective: weighted squared RGB
// difference between sampled colors and proxies, over faces, visible
// frames in `frame_set`, and per-face texel samples.
inline double photometric_energy(const TriMesh& mesh, const TexCoordTable& table,
                                 const ProxyColors& proxies, const FrameStream& stream,
                                 const VisibilityData& vis, const std::vector<int>& frame_set) {
  auto frames = detail::build_sampled_frames(stream, vis);
  return detail::photometric_energy_fused(mesh, table, proxies, frames, vis, frame_set);
}

inline ProxyColors compute_proxies(const TriMesh& mesh, const TexCoordTable& table,
                                   const FrameStream& stream, const VisibilityData& vis,
                                   const std::vector<int>& frame_set, int res) {
  auto frames = detail::build_sampled_frames(stream, vis);
  return detail::compute_proxies_fused(mesh, table, frames, vis, frame_set, res);
}

struct TexCoordResult {
  TexCoordTable table;
  std::vector<double> trace_sampled;  // energy after each sampled-phase iteration
  std::vector<double> trace_full;    // energy after each full-phase iteration
  double initial_energy = 0;          // over the sampled set, before optimization
  double final_energy = 0;            // over all optimized frames
};

namespace detail {

// Photometric energy of the terms touched by vertex `vert` at frame t,
// with an optional coordinate override for that vertex.
inline double local_energy(const TriMesh& mesh, const TexOptWorkspace& ws,
                           const TexCoordTable& table, const ProxyColors& proxies,
                           const SampledFrame& img, const std::vector<uint8_t>& face_vis,
                           int vert, int t, double ov_u, double ov_v, double abort_above) {
  double acc = 0;
  for (int i = ws.vertex_face_offsets[vert]; i < ws.vertex_face_offsets[vert + 1]; ++i) {
    int f = ws.vertex_face_items[i];
    if (!face_vis[f] || !proxies.valid[f]) continue;
    const auto& tri = mesh.faces[f];
    double cu[3], cv[3];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] == vert) {
        cu[k] = ov_u;
        cv[k] = ov_v;
      } else {
        size_t idx = table.idx(tri[k], t);
        cu[k] = table.u[idx];
        cv[k] = table.v[idx];
      }
    }
    const float* proxy = &proxies.rgb[size_t(f) * proxies.samples * 3];
    for (int s = 0; s < proxies.samples; ++s) {
      const auto& b = proxies.bary[s];
      float rgbw[4];
      img.sample4(b[0] * cu[0] + b[1] * cu[1] + b[2] * cu[2],
                  b[0] * cv[0] + b[1] * cv[1] + b[2] * cv[2], rgbw);
      const float* p = proxy + size_t(s) * 3;
      double d0 = rgbw[0] - p[0], d1 = rgbw[1] - p[1], d2 = rgbw[2] - p[2];
      acc += rgbw[3] * (d0 * d0 + d1 * d1 + d2 * d2);
    }
    if (acc >= abort_above) return acc;
  }
  return acc;
}

inline void local_gradient(const TriMesh& mesh, const TexOptWorkspace& ws,
                           const TexCoordTable& table, const ProxyColors& proxies,
                           const SampledFrame& img, const std::vector<uint8_t>& face_vis,
                           int vert, int t, double* gu, double* gv) {
  double gx_acc = 0, gy_acc = 0;
  for (int i = ws.vertex_face_offsets[vert]; i < ws.vertex_face_offsets[vert + 1]; ++i) {
    int f = ws.vertex_face_items[i];
    if (!face_vis[f] || !proxies.valid[f]) continue;
    const auto& tri = mesh.faces[f];
    int corner = tri[0] == vert ? 0 : (tri[1] == vert ? 1 : 2);
    double u0 = table.u[table.idx(tri[0], t)], v0 = table.v[table.idx(tri[0], t)];
    double u1 = table.u[table.idx(tri[1], t)], v1 = table.v[table.idx(tri[1], t)];
    double u2 = table.u[table.idx(tri[2], t)], v2 = table.v[table.idx(tri[2], t)];
    const float* proxy = &proxies.rgb[size_t(f) * proxies.samples * 3];
    for (int s = 0; s < proxies.samples; ++s) {
      const auto& b = proxies.bary[s];
      double bw = b[corner];
      if (bw == 0) continue;
      float val[4], gx[3], gy[3];
      img.sample4_grad(b[0] * u0 + b[1] * u1 + b[2] * u2, b[0] * v0 + b[1] * v1 + b[2] * v2,
                       val, gx, gy);
      const float* p = proxy + size_t(s) * 3;
      double w2b = 2.0 * val[3] * bw;
      gx_acc += w2b * ((val[0] - p[0]) * gx[0] + (val[1] - p[1]) * gx[1] +
                       (val[2] - p[2]) * gx[2]);
      gy_acc += w2b * ((val[0] - p[0]) * gy[0] + (val[1] - p[1]) * gy[1] +
                       (val[2] - p[2]) * gy[2]);
    }
  }
  *gu = gx_acc;
  *gv = gy_acc;
}

}  // namespace detail

// Alternating optimization of coordinates and proxy colors on the sampled
// frames, displacement interpolation for the rest, then a few alternating
// iterations over all (non-held-out) frames.
inline TexCoordResult optimize_texcoords(const MeshSequence& seq, const FrameStream& stream,
                                         const VisibilityData& vis,
                                         const TexCoordParams& params,
                                         const std::vector<uint8_t>& holdout = {}) {
  if (params.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
  const int T = seq.frame_count();
  const int V = seq.base.vertex_count();
  const TriMesh& mesh = seq.base;
  const Camera& cam = stream.camera;

  TexCoordResult result;
  TexCoordTable& table = result.table;
  table.V = V;
  table.T = T;
  table.defined.assign(size_t(V) * T, 0);
  table.u.assign(size_t(V) * T, 0.0);
  table.v.assign(size_t(V) * T, 0.0);
  table.phi_u.assign(size_t(V) * T, 0.0);
  table.phi_v.assign(size_t(V) * T, 0.0);

  auto is_held_out = [&](int t) { return !holdout.empty() && holdout[t]; };

  for (int t = 0; t < T; ++t) {
    const auto& pos = seq.frame_positions[t];
    for (int v = 0; v < V; ++v) {
      if (pos[v].z() <= 0) continue;
      size_t i = table.idx(v, t);
      table.phi_u[i] = cam.fx * pos[v].x() / pos[v].z() + cam.cx;
      table.phi_v[i] = cam.fy * pos[v].y() / pos[v].z() + cam.cy;
      if (vis.vert_visible[t][v]) {
        table.defined[i] = 1;
        table.u[i] = clampd(table.phi_u[i], 0.0, cam.width - 1.0);
        table.v[i] = clampd(table.phi_v[i], 0.0, cam.height - 1.0);
      }
    }
  }

  std::vector<int> frames_opt;
  for (int t = 0; t < T; ++t)
    if (!is_held_out(t)) frames_opt.push_back(t);
  std::vector<int> sampled;
  for (size_t i = 0; i < frames_opt.size(); i += params.sample_stride)
    sampled.push_back(frames_opt[i]);
  std::vector<uint8_t> in_sampled(T, 0);
  for (int t : sampled) in_sampled[t] = 1;

  detail::TexOptWorkspace ws = detail::build_workspace(mesh);
  std::vector<detail::SampledFrame> frames = detail::build_sampled_frames(stream, vis);

  // cooldown: a (v,t) whose line search rejected everything sleeps a few
  // iterations; skipping a vertex never raises the energy
  std::vector<uint8_t> cooldown(size_t(V) * T, 0);

  auto run_alternation = [&](const std::vector<int>& frame_set, ProxyColors& proxies) {
    proxies = detail::compute_proxies_fused(mesh, table, frames, vis, frame_set,
                                            params.proxy_res);
    for (int cls = 0; cls < ws.num_classes; ++cls) {
      const int n_jobs = int(frame_set.size());
#pragma omp parallel for schedule(dynamic, 1)
      for (int job = 0; job < n_jobs; ++job) {
        int t = frame_set[job];
        const detail::SampledFrame& img = frames[t];
        const auto& face_vis = vis.face_visible[t];
        for (int vert = 0; vert < V; ++vert) {
          if (ws.color_class_of[vert] != cls) continue;
          size_t ti = table.idx(vert, t);
          if (!table.defined[ti]) continue;
          if (cooldown[ti] > 0) {
            --cooldown[ti];
            continue;
          }
          bool moved_any = false;
          for (int step = 0; step < params.gd_steps; ++step) {
            double gu, gv;
            detail::local_gradient(mesh, ws, table, proxies, img, face_vis, vert, t, &gu,
                                   &gv);
            double glen = std::sqrt(gu * gu + gv * gv);
            if (glen < 1e-12) break;
            double du = -gu / glen, dv = -gv / glen;
            double cur = detail::local_energy(mesh, ws, table, proxies, img, face_vis,
                                              vert, t, table.u[ti], table.v[ti], kInf);
            bool accepted = false;
            double alpha = params.gd_step_px;
            for (int trial = 0; trial < 4; ++trial, alpha *= 0.5) {
              double cu = clampd(table.u[ti] + alpha * du, 0.0, cam.width - 1.0);
              double cv = clampd(table.v[ti] + alpha * dv, 0.0, cam.height - 1.0);
              double cand = detail::local_energy(mesh, ws, table, proxies, img, face_vis,
                                                 vert, t, cu, cv, cur);
              // a relative floor keeps the search from chasing resampling noise
              if (cand < cur - (1e-12 + 1e-4 * cur)) {
                table.u[ti] = cu;
                table.v[ti] = cv;
                accepted = true;
                moved_any = true;
                break;
              }
            }
            if (!accepted) break;
          }
          if (!moved_any) cooldown[ti] = 1;
        }
      }
    }
  };

  ProxyColors proxies;
  {
    ProxyColors init_proxies =
        detail::compute_proxies_fused(mesh, table, frames, vis, sampled, params.proxy_res);
    result.initial_energy =
        detail::photometric_energy_fused(mesh, table, init_proxies, frames, vis, sampled);
  }
  for (int it = 0; it < params.iters_sampled; ++it) {
    run_alternation(sampled, proxies);
    result.trace_sampled.push_back(
        detail::photometric_energy_fused(mesh, table, proxies, frames, vis, sampled));
  }

  // displacement interpolation for non-sampled frames
  for (int vert = 0; vert < V; ++vert) {
    // sampled frames where this vertex has an optimized coordinate
    std::vector<int> anchors;
    for (int t : sampled)
      if (table.has(vert, t)) anchors.push_back(t);
    for (int t = 0; t < T; ++t) {
      if (in_sampled[t]) continue;
      size_t ti = table.idx(vert, t);
      if (!table.defined[ti]) continue;
      double du = 0, dv = 0;
      if (!anchors.empty()) {
        auto next = std::lower_bound(anchors.begin(), anchors.end(), t);
        if (next == anchors.begin()) {
          du = table.u[table.idx(vert, *next)] - table.phi_u[table.idx(vert, *next)];
          dv = table.v[table.idx(vert, *next)] - table.phi_v[table.idx(vert, *next)];
        } else if (next == anchors.end()) {
          int prev = *(next - 1);
          du = table.u[table.idx(vert, prev)] - table.phi_u[table.idx(vert, prev)];
          dv = table.v[table.idx(vert, prev)] - table.phi_v[table.idx(vert, prev)];
        } else {
          int hi = *next, lo = *(next - 1);
          double w = double(t - lo) / double(hi - lo);
          size_t li = table.idx(vert, lo), hi_i = table.idx(vert, hi);
          du = (1 - w) * (table.u[li] - table.phi_u[li]) + w * (table.u[hi_i] - table.phi_u[hi_i]);
          dv = (1 - w) * (table.v[li] - table.phi_v[li]) + w * (table.v[hi_i] - table.phi_v[hi_i]);
        }
      }
      table.u[ti] = clampd(table.phi_u[ti] + du, 0.0, cam.width - 1.0);
      table.v[ti] = clampd(table.phi_v[ti] + dv, 0.0, cam.height - 1.0);
    }
  }

  for (int it = 0; it < params.iters_full; ++it) {
    run_alternation(frames_opt, proxies);
    result.trace_full.push_back(
        detail::photometric_energy_fused(mesh, table, proxies, frames, vis, frames_opt));
  }

  if (!result.trace_full.empty()) {
    result.final_energy = result.trace_full.back();
  } else {
    ProxyColors final_proxies = detail::compute_proxies_fused(mesh, table, frames, vis,
                                                              frames_opt, params.proxy_res);
    result.final_energy =
        detail::photometric_energy_fused(mesh, table, final_proxies, frames, vis, frames_opt);
  }
  return result;
}

}  // namespace textvol
