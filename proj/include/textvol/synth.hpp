#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "textvol/geometry.hpp"
#include "textvol/texcoord.hpp"

namespace textvol {

enum class BaseShape { Sphere, Cylinder, Slab };

struct Episode {
  int begin = 0, end = 0;  // [begin, end)
  double value = 1.0;

  bool contains(int t) const { return t >= begin && t < end; }
};

inline double episode_value(const std::vector<Episode>& eps, int t, double fallback) {
  for (const auto& e : eps)
    if (e.contains(t)) return e.value;
  return fallback;
}

// Procedurally deforming textured mesh observed by an orbiting camera.
// All quantities are deterministic functions of the spec and seed.
struct SceneSpec {
  BaseShape shape = BaseShape::Sphere;
  int grid_u = 64, grid_v = 16;
  double size = 0.6;  // m
  int frames = 60;
  uint64_t seed = 1;

  int image_width = 400, image_height = 300;
  double focal = 360.0;
  double distance = 1.3;

  double orbit_start_deg = 0.0, orbit_deg = 360.0;
  std::vector<Episode> speed_spikes;  // per-frame orbit speed multipliers
  double wobble_deg = 0.0;

  double bend_amp = 0.0, bend_freq = 1.0;   // radians, cycles per sequence
  double twist_amp = 0.0, twist_freq = 1.0;
  // slave the bend sign to the texture episodes so shape changes coincide
  // with appearance changes
  bool bend_follows_switches = false;

  double tex_scale = 4.0;
  double tex_drift = 0.0;  // slow global phase drift, cycles per sequence
  double atlas_margin = 0.02;

  // dynamic texture region in parameter space, switching between two
  // variants every switch_period frames inside [switch_begin, switch_end)
  double dyn_u0 = 0, dyn_v0 = 0, dyn_u1 = 0, dyn_v1 = 0;
  int switch_period = 0;
  int switch_begin = 0, switch_end = 0;

  double drift_px = 0.0;
  std::vector<Episode> blur;      // frames convolved with a motion kernel
  int blur_len = 9;
  std::vector<Episode> exposure;  // brightness gains
};

struct GroundTruth {
  std::vector<std::vector<Vec3>> true_positions;    // [t][v]
  std::vector<Image8> true_atlases;                 // [t], when requested
  std::vector<std::vector<uint8_t>> true_masks;     // [t][pixel] footprint
  std::vector<std::vector<uint8_t>> true_visibility;  // [t][f]
  std::vector<std::vector<Vec2>> drift_px;          // [t][v], injected
  std::vector<uint8_t> dynamic_faces;               // [f]
  std::vector<int> switch_frames;  // t where the pattern flips between t,t+1
  std::vector<uint8_t> blur_frames;
  std::vector<uint8_t> exposure_frames;
  std::vector<Vec2> vertex_param;  // [v] parameter-space coordinates
};

struct Scene {
  MeshSequence seq;    // reported (possibly drift-corrupted) positions
  FrameStream stream;
  GroundTruth truth;
};

namespace detail {

inline Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

struct PatternCoeffs {
  double a1, b1, p1, a2, b2, p2;
};

// Band-limited color pattern over atlas coordinates. Two variants with
// distinct phases/hues so switches are unmistakable.
struct Pattern {
  PatternCoeffs ch[3][2];  // [channel][variant]

  static Pattern make(uint64_t seed, double scale) {
    Pattern p;
    Rng rng(mix_seed(seed, {0x7061747465726eull}));
    for (int c = 0; c < 3; ++c)
      for (int v = 0; v < 2; ++v) {
        PatternCoeffs& k = p.ch[c][v];
        k.a1 = scale * (0.6 + 0.8 * rng.uniform());
        k.b1 = scale * (0.6 + 0.8 * rng.uniform());
        k.p1 = 2 * M_PI * rng.uniform();
        k.a2 = scale * (1.2 + 1.0 * rng.uniform());
        k.b2 = scale * (1.2 + 1.0 * rng.uniform());
        k.p2 = 2 * M_PI * rng.uniform();
      }
    return p;
  }

  void eval(double u, double v, int variant, float out[3], double phase_shift = 0.0) const {
    for (int c = 0; c < 3; ++c) {
      const PatternCoeffs& k = ch[c][variant];
      double val =
          0.55 + 0.28 * std::sin(2 * M_PI * (k.a1 * u + k.b1 * v) + k.p1 + phase_shift) +
          0.14 * std::sin(2 * M_PI * (k.a2 * u - k.b2 * v) + k.p2 + 1.7 * phase_shift);
      out[c] = float(clampd(val, 0.02, 0.98));
    }
  }
};

inline Image8 motion_blur_horizontal(const Image8& img, int len) {
  Image8 out(img.width, img.height, 3);
  int r = len / 2;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        int acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += img.at(std::clamp(x + i, 0, img.width - 1), y, c);
        out.at(x, y, c) = uint8_t((acc + len / 2) / len);
      }
  return out;
}

inline void dilate_rgb(Image8& img, std::vector<uint8_t>& written, int size) {
  std::vector<uint8_t> src = written;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      size_t i = size_t(y) * size + x;
      if (src[i]) continue;
      int acc[3] = {0, 0, 0}, n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
          if (!src[size_t(ny) * size + nx]) continue;
          for (int c = 0; c < 3; ++c) acc[c] += img.at(nx, ny, c);
          ++n;
        }
      if (n > 0) {
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = uint8_t((acc[c] + n / 2) / n);
        written[i] = 1;
      }
    }
}

}  // namespace detail

// Open parametric grid over [0,1]^2 with a single contiguous atlas chart.
// Shared vertices throughout (no seams), CCW winding with outward normals.
inline TriMesh build_grid_mesh(const SceneSpec& spec, std::vector<Vec2>* param_out) {
  TriMesh mesh;
  const int gu = spec.grid_u, gv = spec.grid_v;
  if (gu < 2 || gv < 2) throw ConfigError("scene grid must be at least 2x2");
  auto surface = [&](double u, double v) -> Vec3 {
    double s = spec.size;
    switch (spec.shape) {
      case BaseShape::Sphere: {
        double phi = u * 2 * M_PI * 0.98;           // open azimuth gap
        double theta = (0.2 + 0.6 * v) * M_PI;      // polar zone, no poles
        return 0.5 * s *
               Vec3(std::sin(theta) * std::cos(phi), std::cos(theta),
                    std::sin(theta) * std::sin(phi));
      }
      case BaseShape::Cylinder: {
        double phi = u * 2 * M_PI * 0.98;
        double y = (v - 0.5) * s;
        return Vec3(0.35 * s * std::cos(phi), y, 0.35 * s * std::sin(phi));
      }
      case BaseShape::Slab: {
        double x = (u - 0.5) * s;
        double y = (v - 0.5) * s * 0.75;
        double z = -0.15 * s * std::cos(M_PI * (u - 0.5));  // gentle bow
        return Vec3(x, y, z);
      }
    }
    return Vec3::Zero();
  };

  mesh.vertices.resize(size_t(gu) * gv);
  mesh.uv.resize(size_t(gu) * gv);
  if (param_out) param_out->resize(size_t(gu) * gv);
  double m = spec.atlas_margin;
  for (int j = 0; j < gv; ++j)
    for (int i = 0; i < gu; ++i) {
      double u = double(i) / (gu - 1), v = double(j) / (gv - 1);
      int idx = j * gu + i;
      mesh.vertices[idx] = surface(u, v);
      mesh.uv[idx] = Vec2(m + (1 - 2 * m) * u, m + (1 - 2 * m) * v);
      if (param_out) (*param_out)[idx] = Vec2(u, v);
    }
  for (int j = 0; j + 1 < gv; ++j)
    for (int i = 0; i + 1 < gu; ++i) {
      int v00 = j * gu + i, v10 = j * gu + i + 1;
      int v01 = (j + 1) * gu + i, v11 = (j + 1) * gu + i + 1;
      mesh.faces.push_back({v00, v10, v11});
      mesh.faces.push_back({v00, v11, v01});
    }

  // orient windings so normals point outward (radially for closed-ish
  // shapes, toward -z for the slab)
  for (auto& f : mesh.faces) {
    Vec3 n = face_normal(mesh.vertices, f);
    Vec3 c = face_centroid(mesh.vertices, f);
    Vec3 outward = spec.shape == BaseShape::Slab ? Vec3(0, 0, -1)
                                                 : Vec3(c.x(), spec.shape == BaseShape::Sphere ? c.y() : 0.0, c.z());
    if (outward.norm() < 1e-12) outward = Vec3(0, 0, -1);
    if (n.dot(outward) < 0) std::swap(f[1], f[2]);
  }
  mesh.build_adjacency();
  return mesh;
}

inline int texture_variant(const SceneSpec& spec, bool dynamic_face, int t) {
  if (!dynamic_face || spec.switch_period <= 0) return 0;
  if (t < spec.switch_begin || t >= spec.switch_end) return 0;
  return ((t - spec.switch_begin) / spec.switch_period) % 2;
}

// Renders the scene: color+depth stream, reported (drifted) mesh motion,
// and the ground truth needed by verification harnesses.
inline Scene generate(const SceneSpec& spec, int gt_atlas_size = 0) {
  if (spec.frames < 1) throw ConfigError("scene: frames must be >= 1");
  Scene scene;
  std::vector<Vec2> param;
  TriMesh mesh = build_grid_mesh(spec, &param);
  const int V = mesh.vertex_count();
  const int F = mesh.face_count();
  const int T = spec.frames;

  Camera cam;
  cam.fx = cam.fy = spec.focal;
  cam.cx = spec.image_width / 2.0;
  cam.cy = spec.image_height / 2.0;
  cam.width = spec.image_width;
  cam.height = spec.image_height;

  // dynamic face set: faces entirely inside the parameter rectangle
  scene.truth.dynamic_faces.assign(F, 0);
  if (spec.dyn_u1 > spec.dyn_u0 && spec.dyn_v1 > spec.dyn_v0) {
    for (int f = 0; f < F; ++f) {
      bool all_in = true;
      for (int k = 0; k < 3; ++k) {
        const Vec2& p = param[mesh.faces[f][k]];
        all_in = all_in && p.x() >= spec.dyn_u0 - 1e-9 && p.x() <= spec.dyn_u1 + 1e-9 &&
                 p.y() >= spec.dyn_v0 - 1e-9 && p.y() <= spec.dyn_v1 + 1e-9;
      }
      scene.truth.dynamic_faces[f] = all_in ? 1 : 0;
    }
  }
  for (int t = 0; t + 1 < T; ++t)
    if (texture_variant(spec, true, t) != texture_variant(spec, true, t + 1))
      scene.truth.switch_frames.push_back(t);

  // orbit angle accumulates through speed spikes
  std::vector<double> orbit(T, spec.orbit_start_deg * M_PI / 180.0);
  double base_step = T > 1 ? spec.orbit_deg * M_PI / 180.0 / (T - 1) : 0.0;
  for (int t = 1; t < T; ++t)
    orbit[t] = orbit[t - 1] + base_step * episode_value(spec.speed_spikes, t - 1, 1.0);

  scene.truth.true_positions.assign(T, std::vector<Vec3>(V));
  for (int t = 0; t < T; ++t) {
    double phase = T > 1 ? double(t) / (T - 1) : 0.0;
    double bend = spec.bend_follows_switches
                      ? spec.bend_amp * (texture_variant(spec, true, t) ? -1.0 : 1.0)
                      : spec.bend_amp * std::sin(2 * M_PI * spec.bend_freq * phase);
    double twist = spec.twist_amp * std::sin(2 * M_PI * spec.twist_freq * phase);
    double wobble = spec.wobble_deg * M_PI / 180.0 * std::sin(2 * M_PI * phase);
    Mat3 orb = detail::rot_y(orbit[t]) * detail::rot_x(wobble);
    for (int v = 0; v < V; ++v) {
      Vec3 p = mesh.vertices[v];
      double ynorm = clampd(p.y() / (0.5 * spec.size) , -1.0, 1.0);
      Vec3 q = detail::rot_y(twist * ynorm) * (detail::rot_x(bend * ynorm) * p);
      scene.truth.true_positions[t][v] = orb * q + Vec3(0, 0, spec.distance);
    }
  }

  // tangential drift: the reported track is wrong, the images are right
  scene.truth.drift_px.assign(T, std::vector<Vec2>(V, Vec2::Zero()));
  scene.seq.base = mesh;
  scene.seq.frame_positions.assign(T, std::vector<Vec3>(V));
  Rng drift_rng(mix_seed(spec.seed, {0x64726966ull}));
  double pa = 2 * M_PI * drift_rng.uniform(), pb = 2 * M_PI * drift_rng.uniform();
  for (int t = 0; t < T; ++t) {
    double phase = T > 1 ? double(t) / (T - 1) : 0.0;
    for (int v = 0; v < V; ++v) {
      Vec3 p = scene.truth.true_positions[t][v];
      Vec2 d(0, 0);
      if (spec.drift_px > 0) {
        double amp = spec.drift_px * 0.7;
        d.x() = amp * std::sin(2 * M_PI * (1.3 * param[v].x() + 0.7 * param[v].y()) +
                               2 * M_PI * 1.5 * phase + pa);
        d.y() = amp * std::cos(2 * M_PI * (0.9 * param[v].x() - 1.1 * param[v].y()) +
                               2 * M_PI * 1.1 * phase + pb);
      }
      scene.truth.drift_px[t][v] = d;
      scene.seq.frame_positions[t][v] =
          p + Vec3(d.x() * p.z() / cam.fx, d.y() * p.z() / cam.fy, 0.0);
    }
  }

  // render color + depth from the true positions
  detail::Pattern pattern = detail::Pattern::make(spec.seed, spec.tex_scale);
  scene.stream.camera = cam;
  scene.stream.colors.resize(T);
  scene.stream.depths.resize(T);
  scene.truth.true_masks.resize(T);
  scene.truth.true_visibility.resize(T);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T; ++t) {
    const auto& pos = scene.truth.true_positions[t];
    DepthIdMap render = render_depth(pos, mesh.faces, cam);
    Image8 color(cam.width, cam.height, 3);
    std::vector<uint16_t> depth(size_t(cam.width) * cam.height, 0);
    std::vector<uint8_t> mask(size_t(cam.width) * cam.height, 0);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        int f = render.id_at(x, y);
        if (f < 0) continue;
        size_t i = size_t(y) * cam.width + x;
        mask[i] = 1;
        double z = render.depth_at(x, y);
        depth[i] = uint16_t(clampd(std::lround(z * 1000.0), 1, 65535));
        // perspective-correct uv at the pixel center
        const auto& tri = mesh.faces[f];
        const Vec3 &a = pos[tri[0]], &b = pos[tri[1]], &c = pos[tri[2]];
        double u0 = cam.fx * a.x() / a.z() + cam.cx, w0 = cam.fy * a.y() / a.z() + cam.cy;
        double u1 = cam.fx * b.x() / b.z() + cam.cx, w1 = cam.fy * b.y() / b.z() + cam.cy;
        double u2 = cam.fx * c.x() / c.z() + cam.cx, w2 = cam.fy * c.y() / c.z() + cam.cy;
        double sx = x + 0.5, sy = y + 0.5;
        double area = (u1 - u0) * (w2 - w0) - (w1 - w0) * (u2 - u0);
        if (area == 0) continue;
        double b0 = ((u2 - u1) * (sy - w1) - (w2 - w1) * (sx - u1)) / area;
        double b1 = ((u0 - u2) * (sy - w2) - (w0 - w2) * (sx - u2)) / area;
        double b2 = 1.0 - b0 - b1;
        double q0 = b0 / a.z(), q1 = b1 / b.z(), q2 = b2 / c.z();
        double qs = q0 + q1 + q2;
        Vec2 uv = (q0 * mesh.uv[tri[0]] + q1 * mesh.uv[tri[1]] + q2 * mesh.uv[tri[2]]) / qs;
        int variant = texture_variant(spec, scene.truth.dynamic_faces[f], t);
        double shift = 2 * M_PI * spec.tex_drift * (T > 1 ? double(t) / (T - 1) : 0.0);
        float rgb[3];
        pattern.eval(uv.x(), uv.y(), variant, rgb, shift);
        for (int ch = 0; ch < 3; ++ch) color.at(x, y, ch) = to_byte(rgb[ch]);
      }
    if (episode_value(spec.blur, t, 0.0) > 0.0)
      color = detail::motion_blur_horizontal(color, spec.blur_len);
    double gain = episode_value(spec.exposure, t, 1.0);
    if (gain != 1.0)
      for (auto& px : color.data) px = uint8_t(clampd(std::lround(px * gain), 0, 255));
    scene.stream.colors[t] = std::move(color);
    scene.stream.depths[t] = std::move(depth);
    scene.truth.true_masks[t] = std::move(mask);
    scene.truth.true_visibility[t] =
        face_visibility(pos, mesh.faces, cam, render, 0.005);
  }

  scene.truth.blur_frames.assign(T, 0);
  scene.truth.exposure_frames.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    scene.truth.blur_frames[t] = episode_value(spec.blur, t, 0.0) > 0.0 ? 1 : 0;
    scene.truth.exposure_frames[t] = episode_value(spec.exposure, t, 1.0) != 1.0 ? 1 : 0;
  }
  scene.truth.vertex_param = param;

  for (int t = 0; t < T; ++t) {
    bool any = false;
    for (int f = 0; f < F && !any; ++f) any = scene.truth.true_visibility[t][f];
    if (!any) throw ContractError("scene: no visible face at frame " + std::to_string(t));
  }

  if (gt_atlas_size > 0) {
    AtlasLayout layout = build_atlas_layout(mesh, gt_atlas_size);
    scene.truth.true_atlases.resize(T);
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < T; ++t) {
      Image8 atlas(gt_atlas_size, gt_atlas_size, 3);
      std::vector<uint8_t> written(size_t(gt_atlas_size) * gt_atlas_size, 0);
      double shift = 2 * M_PI * spec.tex_drift * (T > 1 ? double(t) / (T - 1) : 0.0);
      for (int f = 0; f < F; ++f) {
        int variant = texture_variant(spec, scene.truth.dynamic_faces[f], t);
        for (int texel : layout.face_texels[f]) {
          int x = texel % gt_atlas_size, y = texel / gt_atlas_size;
          double u = (x + 0.5) / gt_atlas_size, v = (y + 0.5) / gt_atlas_size;
          float rgb[3];
          pattern.eval(u, v, variant, rgb, shift);
          for (int ch = 0; ch < 3; ++ch) atlas.at(x, y, ch) = to_byte(rgb[ch]);
          written[texel] = 1;
        }
      }
      detail::dilate_rgb(atlas, written, gt_atlas_size);
      scene.truth.true_atlases[t] = std::move(atlas);
    }
  }

  scene.seq.validate();
  scene.stream.validate();
  return scene;
}

namespace detail {

inline std::vector<Episode> parse_episodes(const std::string& text) {
  // "12-18" or "12-18:1.5", comma separated
  std::vector<Episode> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos);
    pos = comma == std::string::npos ? text.size() : comma + 1;
    if (item.empty()) continue;
    Episode e;
    size_t dash = item.find('-');
    size_t colon = item.find(':');
    if (dash == std::string::npos) throw ConfigError("bad episode '" + item + "'");
    e.begin = std::stoi(item.substr(0, dash));
    e.end = std::stoi(item.substr(dash + 1, colon == std::string::npos
                                                ? std::string::npos
                                                : colon - dash - 1));
    if (colon != std::string::npos) e.value = std::stod(item.substr(colon + 1));
    out.push_back(e);
  }
  return out;
}

}  // namespace detail

// Parse from flat key=value text fields. Unknown keys are errors so typos
// do not silently change scenes.
inline SceneSpec scene_spec_from_kv(const std::map<std::string, std::string>& kv) {
  SceneSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "shape") {
      if (value == "sphere") spec.shape = BaseShape::Sphere;
      else if (value == "cylinder") spec.shape = BaseShape::Cylinder;
      else if (value == "slab") spec.shape = BaseShape::Slab;
      else throw ConfigError("unknown shape '" + value + "'");
    } else if (key == "grid_u") spec.grid_u = std::stoi(value);
    else if (key == "grid_v") spec.grid_v = std::stoi(value);
    else if (key == "size") spec.size = std::stod(value);
    else if (key == "frames") spec.frames = std::stoi(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else if (key == "image_width") spec.image_width = std::stoi(value);
    else if (key == "image_height") spec.image_height = std::stoi(value);
    else if (key == "focal") spec.focal = std::stod(value);
    else if (key == "distance") spec.distance = std::stod(value);
    else if (key == "orbit_start_deg") spec.orbit_start_deg = std::stod(value);
    else if (key == "orbit_deg") spec.orbit_deg = std::stod(value);
    else if (key == "speed_spikes") spec.speed_spikes = detail::parse_episodes(value);
    else if (key == "wobble_deg") spec.wobble_deg = std::stod(value);
    else if (key == "bend_amp") spec.bend_amp = std::stod(value);
    else if (key == "bend_freq") spec.bend_freq = std::stod(value);
    else if (key == "bend_follows_switches") spec.bend_follows_switches = value == "1" || value == "true";
    else if (key == "twist_amp") spec.twist_amp = std::stod(value);
    else if (key == "twist_freq") spec.twist_freq = std::stod(value);
    else if (key == "tex_scale") spec.tex_scale = std::stod(value);
    else if (key == "tex_drift") spec.tex_drift = std::stod(value);
    else if (key == "atlas_margin") spec.atlas_margin = std::stod(value);
    else if (key == "dyn_u0") spec.dyn_u0 = std::stod(value);
    else if (key == "dyn_v0") spec.dyn_v0 = std::stod(value);
    else if (key == "dyn_u1") spec.dyn_u1 = std::stod(value);
    else if (key == "dyn_v1") spec.dyn_v1 = std::stod(value);
    else if (key == "switch_period") spec.switch_period = std::stoi(value);
    else if (key == "switch_begin") spec.switch_begin = std::stoi(value);
    else if (key == "switch_end") spec.switch_end = std::stoi(value);
    else if (key == "drift_px") spec.drift_px = std::stod(value);
    else if (key == "blur") spec.blur = detail::parse_episodes(value);
    else if (key == "blur_len") spec.blur_len = std::stoi(value);
    else if (key == "exposure") spec.exposure = detail::parse_episodes(value);
    else throw ConfigError("unknown scene key '" + key + "'");
  }
  return spec;
}

// Trivial per-triangle packer for external meshes without atlas
// coordinates. Splits vertices (3 per face) and assigns each face half of
// a grid cell; adjacency is rebuilt from coincident rest positions.
inline TriMesh pack_per_triangle(const TriMesh& src) {
  TriMesh out;
  const int F = src.face_count();
  int cells = int(std::ceil(std::sqrt((F + 1) / 2.0)));
  double cell = 1.0 / cells;
  double margin = 0.12 * cell;
  out.vertices.resize(size_t(F) * 3);
  out.uv.resize(size_t(F) * 3);
  out.faces.resize(F);
  for (int f = 0; f < F; ++f) {
    int cell_id = f / 2;
    int cx = cell_id % cells, cy = cell_id / cells;
    double ox = cx * cell, oy = cy * cell;
    Vec2 corners[3];
    if (f % 2 == 0) {
      corners[0] = Vec2(ox + margin, oy + margin);
      corners[1] = Vec2(ox + cell - 2 * margin, oy + margin);
      corners[2] = Vec2(ox + margin, oy + cell - 2 * margin);
    } else {
      corners[0] = Vec2(ox + cell - margin, oy + cell - margin);
      corners[1] = Vec2(ox + 2 * margin, oy + cell - margin);
      corners[2] = Vec2(ox + cell - margin, oy + 2 * margin);
    }
    for (int k = 0; k < 3; ++k) {
      int nv = f * 3 + k;
      out.vertices[nv] = src.vertices[src.faces[f][k]];
      out.uv[nv] = corners[k];
      out.faces[f][k] = nv;
    }
  }
  // positional adjacency: canonicalize identical rest positions
  std::map<std::array<int64_t, 3>, int> canon;
  std::vector<int> canon_of(out.vertices.size());
  for (size_t v = 0; v < out.vertices.size(); ++v) {
    std::array<int64_t, 3> key = {int64_t(std::llround(out.vertices[v].x() * 1e9)),
                                  int64_t(std::llround(out.vertices[v].y() * 1e9)),
                                  int64_t(std::llround(out.vertices[v].z() * 1e9))};
    auto [it, inserted] = canon.try_emplace(key, int(v));
    canon_of[v] = it->second;
  }
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < F; ++f)
    for (int k = 0; k < 3; ++k) {
      int a = canon_of[out.faces[f][k]], b = canon_of[out.faces[f][(k + 1) % 3]];
      edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
    }
  out.face_adjacency.clear();
  for (const auto& [e, fs] : edge_faces)
    if (fs.size() == 2) out.face_adjacency.emplace_back(fs[0], fs[1]);
  return out;
}

}  // namespace textvol
