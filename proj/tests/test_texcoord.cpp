#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace textvol;

namespace {

SceneSpec drift_spec(double drift_px) {
  SceneSpec spec;
  spec.shape = BaseShape::Slab;
  spec.grid_u = 18;
  spec.grid_v = 12;
  spec.frames = 16;
  spec.image_width = 200;
  spec.image_height = 150;
  spec.focal = 260;
  spec.orbit_deg = 30;
  spec.orbit_start_deg = -15;
  spec.tex_scale = 2.0;
  spec.drift_px = drift_px;
  spec.seed = 17;
  return spec;
}

double mask_iou(const Image& mask, const std::vector<uint8_t>& truth, double w_bg) {
  (void)w_bg;
  long inter = 0, uni = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      bool a = mask.at(x, y) > 0.5f;
      bool b = truth[size_t(y) * mask.width + x] != 0;
      if (a && b) ++inter;
      if (a || b) ++uni;
    }
  return uni > 0 ? double(inter) / uni : 1.0;
}

}  // namespace

TEST_CASE("foreground mask: agreement, invalid depth, and truth IoU") {
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 2;
  Scene scene = generate(spec);
  const Camera& cam = scene.stream.camera;
  DepthIdMap render = render_depth(scene.seq.frame_positions[0], scene.seq.base.faces, cam);
  double w_bg = 0.05;
  Image mask = foreground_mask(scene.stream.depths[0], cam, render, 0.02, w_bg);

  // a pixel on the object with matching sensor depth scores 1
  int on_x = -1, on_y = -1;
  for (int y = 0; y < cam.height && on_x < 0; ++y)
    for (int x = 0; x < cam.width && on_x < 0; ++x)
      if (scene.truth.true_masks[0][size_t(y) * cam.width + x]) {
        on_x = x;
        on_y = y;
      }
  REQUIRE(on_x >= 0);
  CHECK(mask.at(on_x, on_y) == 1.0f);

  // invalid (zero) sensor depth is background
  std::vector<uint16_t> zeroed = scene.stream.depths[0];
  zeroed[size_t(on_y) * cam.width + on_x] = 0;
  Image mask2 = foreground_mask(zeroed, cam, render, 0.02, w_bg);
  CHECK(mask2.at(on_x, on_y) == float(w_bg));

  CHECK(mask_iou(mask, scene.truth.true_masks[0], w_bg) > 0.95);
}

TEST_CASE("photometric energy: constant-color stream has zero energy") {
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 3;
  Scene scene = generate(spec);
  for (auto& img : scene.stream.colors)
    std::fill(img.data.begin(), img.data.end(), uint8_t(128));
  TexCoordParams params;
  params.sample_stride = 1;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis,
                                          [] {
                                            TexCoordParams p;
                                            p.sample_stride = 1;
                                            p.iters_sampled = 0;
                                            p.iters_full = 0;
                                            return p;
                                          }());
  std::vector<int> frames = {0, 1, 2};
  ProxyColors proxies =
      compute_proxies(scene.seq.base, res.table, scene.stream, vis, frames, 8);
  double e = photometric_energy(scene.seq.base, res.table, proxies, scene.stream, vis, frames);
  CHECK(e == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("photometric energy: single visible frame is exactly zero") {
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 1;
  Scene scene = generate(spec);
  TexCoordParams params;
  params.iters_sampled = 0;
  params.iters_full = 0;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  std::vector<int> frames = {0};
  ProxyColors proxies =
      compute_proxies(scene.seq.base, res.table, scene.stream, vis, frames, 8);
  double e = photometric_energy(scene.seq.base, res.table, proxies, scene.stream, vis, frames);
  CHECK(e == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("photometric energy: matches hand-computed arithmetic on one face") {
  // one right triangle covering known pixels of two tiny flat images
  TriMesh mesh;
  mesh.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
  mesh.faces = {{0, 1, 2}};
  mesh.uv = {Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.1, 0.9)};
  mesh.build_adjacency();

  FrameStream stream;
  stream.camera = Camera{10, 10, 8, 8, 16, 16};
  Image8 img0(16, 16, 3, 100), img1(16, 16, 3, 160);
  stream.colors = {img0, img1};
  stream.depths = {std::vector<uint16_t>(256, 1000), std::vector<uint16_t>(256, 1000)};

  TexCoordTable table;
  table.V = 3;
  table.T = 2;
  table.defined.assign(6, 1);
  table.u = {2, 12, 2, 2, 12, 2};
  table.v = {2, 2, 12, 2, 2, 12};
  table.phi_u = table.u;
  table.phi_v = table.v;

  VisibilityData vis;
  vis.face_visible = {{1}, {1}};
  vis.vert_visible = {{1, 1, 1}, {1, 1, 1}};
  vis.masks = {Image(16, 16, 1, 1.f), Image(16, 16, 1, 1.f)};

  // proxies over both frames: every sample averages (100, 160)/255
  ProxyColors proxies = compute_proxies(mesh, table, stream, vis, {0, 1}, 2);
  double mean = (100 / 255.0 + 160 / 255.0) / 2.0;
  for (int s = 0; s < proxies.samples; ++s)
    for (int c = 0; c < 3; ++c)
      CHECK(proxies.rgb[size_t(s) * 3 + c] == doctest::Approx(mean).epsilon(1e-6));

  // per frame-sample term: 3 channels * (v - mean)^2, 4 samples, 2 frames
  double d0 = 100 / 255.0 - mean, d1 = 160 / 255.0 - mean;
  double expected = 4 * 3 * (d0 * d0) + 4 * 3 * (d1 * d1);
  double e = photometric_energy(mesh, table, proxies, stream, vis, {0, 1});
  CHECK(e == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("optimizer: perfectly tracked scene stays at the initialization") {
  SceneSpec spec = drift_spec(0.0);
  spec.focal = 520;     // slab overfills the frame: all samples are interior
  spec.tex_scale = 1.2;  // low-frequency pattern keeps resampling bias tiny
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 4;
  params.iters_sampled = 6;
  params.iters_full = 2;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  double max_disp = 0;
  for (int t = 0; t < res.table.T; ++t)
    for (int v = 0; v < res.table.V; ++v)
      if (res.table.has(v, t)) max_disp = std::max(max_disp, res.table.displacement(v, t).norm());
  CHECK(max_disp < 0.1);
  CHECK(res.trace_sampled.back() <=
        res.initial_energy * (1 + 1e-6) + 1e-9);
  CHECK(res.trace_sampled.back() >= res.initial_energy * 0.9);
}

TEST_CASE("optimizer: drift injection is recovered, energy halves") {
  SceneSpec spec = drift_spec(2.0);
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 4;
  params.iters_sampled = 12;
  params.iters_full = 3;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);

  TexCoordParams init_params = params;
  init_params.iters_sampled = 0;
  init_params.iters_full = 0;
  init_params.sample_stride = 1;
  TexCoordResult init = optimize_texcoords(scene.seq, scene.stream, vis, init_params);
  std::vector<int> all_frames;
  for (int t = 0; t < spec.frames; ++t) all_frames.push_back(t);
  ProxyColors proxies =
      compute_proxies(scene.seq.base, init.table, scene.stream, vis, all_frames, 8);
  double e_init =
      photometric_energy(scene.seq.base, init.table, proxies, scene.stream, vis, all_frames);

  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  CHECK(res.final_energy < 0.5 * e_init);

  // the recovered displacement should cancel the injected drift
  double err_sum = 0;
  long n = 0;
  for (int t = 0; t < res.table.T; ++t)
    for (int v = 0; v < res.table.V; ++v) {
      if (!res.table.has(v, t)) continue;
      Vec2 disp = res.table.displacement(v, t);
      Vec2 want = -scene.truth.drift_px[t][v];
      err_sum += (disp - want).norm();
      ++n;
    }
  CHECK(err_sum / n < 1.0);  // mean residual under a pixel
}

TEST_CASE("optimizer: energy trace is non-increasing in both phases") {
  SceneSpec spec = drift_spec(1.5);
  spec.frames = 12;
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 3;
  params.iters_sampled = 8;
  params.iters_full = 2;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  REQUIRE(!res.trace_sampled.empty());
  CHECK(res.trace_sampled.front() <= res.initial_energy + 1e-9);
  for (size_t i = 1; i < res.trace_sampled.size(); ++i)
    CHECK(res.trace_sampled[i] <= res.trace_sampled[i - 1] + 1e-9);
  for (size_t i = 1; i < res.trace_full.size(); ++i)
    CHECK(res.trace_full[i] <= res.trace_full[i - 1] + 1e-9);
}

TEST_CASE("optimizer: stride 1 equals the full-frame schedule bitwise") {
  SceneSpec spec = drift_spec(1.0);
  spec.frames = 8;
  Scene scene = generate(spec);
  TexCoordParams a;
  a.sample_stride = 1;
  a.iters_sampled = 4;
  a.iters_full = 2;
  TexCoordParams b;
  b.sample_stride = 1;
  b.iters_sampled = 6;
  b.iters_full = 0;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, a);
  TexCoordResult ra = optimize_texcoords(scene.seq, scene.stream, vis, a);
  TexCoordResult rb = optimize_texcoords(scene.seq, scene.stream, vis, b);
  CHECK(ra.table.u == rb.table.u);
  CHECK(ra.table.v == rb.table.v);
  CHECK(ra.table.defined == rb.table.defined);
}

TEST_CASE("optimizer: interpolated displacements are affine between samples") {
  SceneSpec spec = drift_spec(2.0);
  spec.frames = 13;
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 4;  // samples 0,4,8,12
  params.iters_sampled = 5;
  params.iters_full = 0;  // keep interpolation output untouched
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  const auto& table = res.table;
  int checked = 0;
  for (int v = 0; v < table.V; ++v) {
    for (int s = 0; s + 4 < 13; s += 4) {
      bool all = true;
      for (int t = s; t <= s + 4; ++t) all = all && table.has(v, t);
      if (!all) continue;
      Vec2 d0 = table.displacement(v, s), d1 = table.displacement(v, s + 4);
      for (int k = 1; k < 4; ++k) {
        // skip clamped coordinates (not affine by design)
        Vec2 expect = d0 + (d1 - d0) * (k / 4.0);
        Vec2 raw = table.phi(v, s + k) + expect;
        if (raw.x() < 0 || raw.y() < 0 || raw.x() > scene.stream.camera.width - 1 ||
            raw.y() > scene.stream.camera.height - 1)
          continue;
        CHECK((table.displacement(v, s + k) - expect).norm() < 1e-9);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("optimizer: coordinates never leave the image rectangle") {
  SceneSpec spec = drift_spec(2.0);
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 2;
  params.iters_sampled = 4;
  params.iters_full = 1;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  for (int t = 0; t < res.table.T; ++t)
    for (int v = 0; v < res.table.V; ++v) {
      if (!res.table.has(v, t)) continue;
      Vec2 c = res.table.coord(v, t);
      CHECK(c.x() >= 0);
      CHECK(c.y() >= 0);
      CHECK(c.x() <= scene.stream.camera.width - 1);
      CHECK(c.y() <= scene.stream.camera.height - 1);
    }
}

TEST_CASE("optimizer: displacement identity holds exactly") {
  SceneSpec spec = drift_spec(1.0);
  spec.frames = 6;
  Scene scene = generate(spec);
  TexCoordParams params;
  params.sample_stride = 2;
  params.iters_sampled = 3;
  params.iters_full = 1;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, params);
  TexCoordResult res = optimize_texcoords(scene.seq, scene.stream, vis, params);
  for (int t = 0; t < res.table.T; ++t)
    for (int v = 0; v < res.table.V; ++v)
      if (res.table.has(v, t)) {
        Vec2 d = res.table.displacement(v, t);
        Vec2 back = res.table.phi(v, t) + d;
        CHECK(back.x() == res.table.coord(v, t).x());
        CHECK(back.y() == res.table.coord(v, t).y());
      }
}

TEST_CASE("optimizer: sampled strides stay close to full-frame quality") {
  SceneSpec spec = drift_spec(1.5);
  spec.frames = 20;
  spec.grid_u = 14;
  spec.grid_v = 10;
  Scene scene = generate(spec);
  TexCoordParams full;
  full.sample_stride = 1;
  full.iters_sampled = 10;
  full.iters_full = 2;
  VisibilityData vis = compute_visibility(scene.seq, scene.stream, full);
  double e_full = optimize_texcoords(scene.seq, scene.stream, vis, full).final_energy;
  for (int stride : {2, 4}) {
    TexCoordParams p = full;
    p.sample_stride = stride;
    double e = optimize_texcoords(scene.seq, scene.stream, vis, p).final_energy;
    CHECK(e / e_full < 1.05);
  }
}
