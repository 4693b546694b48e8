#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace textvol;
using tv_test::TempDir;

namespace {

// generate a small scene into a directory and return a config for it
RunConfig small_run(const TempDir& dir, SceneSpec spec, const std::string& name) {
  Scene scene = generate(spec);
  std::string scene_dir = dir.str() + "/" + name;
  write_scene(scene_dir, scene, 0);
  RunConfig cfg;
  cfg.mesh_path = scene_dir + "/mesh.obj";
  cfg.stream_dir = scene_dir + "/stream";
  cfg.positions_dir = scene_dir + "/positions";
  cfg.out_dir = scene_dir + "/out";
  cfg.atlas_size = 96;
  cfg.tex.sample_stride = 2;
  cfg.tex.iters_sampled = 2;
  cfg.tex.iters_full = 1;
  cfg.solver_max_outer = 4;
  cfg.prune = 0;
  cfg.ssim_window = 7;
  return cfg;
}

std::string manifest_without_slices(const std::string& manifest) {
  // strip nothing: the whole manifest participates in the hash
  return manifest;
}

}  // namespace

TEST_CASE("pipeline: second run is all cache hits with an identical manifest") {
  TempDir dir("pipe_cache");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 4;
  RunConfig cfg = small_run(dir, spec, "scene");
  StageOutputs first = run_pipeline(cfg);
  CHECK(!first.texopt_cached);
  CHECK(!first.label_cached);
  CHECK(!first.assemble_cached);
  uint64_t manifest_hash = hash_file(cfg.out_dir + "/volume.manifest");

  StageOutputs second = run_pipeline(cfg);
  CHECK(second.texopt_cached);
  CHECK(second.label_cached);
  CHECK(second.assemble_cached);
  CHECK(hash_file(cfg.out_dir + "/volume.manifest") == manifest_hash);
  CHECK(manifest_without_slices(second.volume.manifest) ==
        manifest_without_slices(first.volume.manifest));
}

TEST_CASE("pipeline: fresh runs with the same seed are bit-identical") {
  TempDir dir("pipe_det");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 4;
  RunConfig cfg_a = small_run(dir, spec, "scene");
  RunConfig cfg_b = cfg_a;
  cfg_b.out_dir = dir.str() + "/scene/out_b";
  run_pipeline(cfg_a);
  run_pipeline(cfg_b);
  // manifests and every slice must match byte for byte
  CHECK(read_text_file(cfg_a.out_dir + "/volume.manifest") ==
        read_text_file(cfg_b.out_dir + "/volume.manifest"));
  for (int t = 0; t < spec.frames; ++t) {
    std::string name = "/" + frame_name("slice", t, "png");
    CHECK(hash_file(cfg_a.out_dir + name) == hash_file(cfg_b.out_dir + name));
  }
}

TEST_CASE("pipeline: changing an input invalidates the caches") {
  TempDir dir("pipe_invalidate");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 3;
  RunConfig cfg = small_run(dir, spec, "scene");
  run_pipeline(cfg);
  // regenerate the scene with a different texture seed
  SceneSpec spec2 = spec;
  spec2.seed = spec.seed + 1;
  Scene scene2 = generate(spec2);
  write_scene(dir.str() + "/scene", scene2, 0);
  StageOutputs rerun = run_pipeline(cfg);
  CHECK(!rerun.texopt_cached);
  CHECK(!rerun.label_cached);
  CHECK(!rerun.assemble_cached);
}

TEST_CASE("pipeline: corrupt mesh fails as a config error naming the file") {
  TempDir dir("pipe_corrupt");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 2;
  RunConfig cfg = small_run(dir, spec, "scene");
  write_text_file(cfg.mesh_path, "v 0 0 0\nnot a mesh line ???\nf 1/1 1/1 1/1\n");
  try {
    run_pipeline(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mesh") != std::string::npos);
  }
}

TEST_CASE("pipeline: holdout frames are excluded from candidates and proxies") {
  TempDir dir("pipe_holdout");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 6;
  RunConfig cfg = small_run(dir, spec, "scene");
  cfg.holdout_stride = 3;  // holds out t = 2, 5
  StageOutputs out = run_pipeline(cfg);
  for (const auto& row : out.labels.labels)
    for (int t = 0; t < 6; ++t) {
      CHECK(row[t] != 2);
      CHECK(row[t] != 5);
    }
  // eval still reports on held-out frames
  std::string report = read_text_file(cfg.out_dir + "/report.txt");
  CHECK(report.find("psnr_heldout") != std::string::npos);
}

TEST_CASE("pipeline: ppm fallback produces a readable volume") {
  TempDir dir("pipe_ppm");
  SceneSpec spec = tv_test::small_slab_spec();
  spec.frames = 2;
  RunConfig cfg = small_run(dir, spec, "scene");
  cfg.use_ppm = true;
  run_pipeline(cfg);
  Image8 slice = read_ppm(cfg.out_dir + "/slice_00000.ppm");
  CHECK(slice.width == cfg.atlas_size);
}

TEST_CASE("config file parsing drives the pipeline settings") {
  auto kv = parse_keyvalues(
      "mesh=m.obj\nstream=s\npositions=p\nout=o\nomega_s=5\ntheta_omega=0.9\n"
      "sample_stride=3\natlas_size=128\nholdout_stride=6\nselective=0\n");
  RunConfig cfg = RunConfig::from_kv(kv);
  CHECK(cfg.params.omega_s == doctest::Approx(5.0));
  CHECK(cfg.params.theta_omega == doctest::Approx(0.9));
  CHECK(cfg.tex.sample_stride == 3);
  CHECK(cfg.atlas_size == 128);
  CHECK(cfg.holdout_stride == 6);
  CHECK(!cfg.selective);
  CHECK_THROWS_AS(RunConfig::from_kv({{"theta_omega", "1.5"}}), ConfigError);
}
