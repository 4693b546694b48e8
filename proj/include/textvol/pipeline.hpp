#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "textvol/io.hpp"
#include "textvol/metrics.hpp"
#include "textvol/synth.hpp"
#include "textvol/volume.hpp"

namespace textvol {

struct RunConfig {
  std::string mesh_path;
  std::string stream_dir;
  std::string positions_dir;
  std::string out_dir = "out";

  Params params;
  TexCoordParams tex;

  double solver_tol = 1e-4;
  int solver_max_outer = 20;
  int solver_sweep_cap = 10;
  uint64_t seed = 1;
  int prune = 40;

  int atlas_size = 1024;
  int ssim_window = 11;
  double alpha_screen = 0.03;
  double cg_tol = 1e-6;
  int holdout_stride = 0;
  int workers = 0;
  bool use_ppm = false;
  bool selective = true;
  bool enable_quality = true;
  bool enable_local = true;
  bool color_correction = true;
  bool debug_overlays = false;
  int edge_samples = 16;
  int face_samples_u = 8, face_samples_v = 4;
  double ransac_inlier_m = 0.01;
  int shot_stride = 0;  // 0 = follow tex.sample_stride
  double shot_radius_factor = 5.0;

  int effective_shot_stride() const {
    return shot_stride > 0 ? shot_stride : tex.sample_stride;
  }

  void validate() const {
    params.validate();
    if (tex.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
    if (atlas_size < 16) throw ConfigError("atlas_size too small");
    if (holdout_stride == 1) throw ConfigError("holdout_stride=1 would hold out every frame");
    if (ssim_window < 1 || ssim_window % 2 == 0)
      throw ConfigError("ssim_window must be odd");
  }

  std::vector<uint8_t> holdout_mask(int T) const {
    std::vector<uint8_t> mask(T, 0);
    if (holdout_stride > 1)
      for (int t = holdout_stride - 1; t < T; t += holdout_stride) mask[t] = 1;
    return mask;
  }

  static RunConfig from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) {
      if (key == "mesh") cfg.mesh_path = value;
      else if (key == "stream") cfg.stream_dir = value;
      else if (key == "positions") cfg.positions_dir = value;
      else if (key == "out") cfg.out_dir = value;
      else if (key == "omega_g") cfg.params.omega_g = std::stod(value);
      else if (key == "omega_s") cfg.params.omega_s = std::stod(value);
      else if (key == "omega_t") cfg.params.omega_t = std::stod(value);
      else if (key == "lambda") cfg.params.lambda = std::stod(value);
      else if (key == "theta_b") cfg.params.theta_b = std::stod(value);
      else if (key == "theta_n") cfg.params.theta_n = std::stod(value);
      else if (key == "theta_omega") cfg.params.theta_omega = std::stod(value);
      else if (key == "sample_stride") cfg.tex.sample_stride = std::stoi(value);
      else if (key == "iters_sampled") cfg.tex.iters_sampled = std::stoi(value);
      else if (key == "iters_full") cfg.tex.iters_full = std::stoi(value);
      else if (key == "gd_steps") cfg.tex.gd_steps = std::stoi(value);
      else if (key == "gd_step_px") cfg.tex.gd_step_px = std::stod(value);
      else if (key == "proxy_res") cfg.tex.proxy_res = std::stoi(value);
      else if (key == "delta_fg") cfg.tex.delta_fg = std::stod(value);
      else if (key == "w_bg") cfg.tex.w_bg = std::stod(value);
      else if (key == "delta_occ") cfg.tex.delta_occ = std::stod(value);
      else if (key == "solver_tol") cfg.solver_tol = std::stod(value);
      else if (key == "solver_max_outer") cfg.solver_max_outer = std::stoi(value);
      else if (key == "solver_sweep_cap") cfg.solver_sweep_cap = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "prune") cfg.prune = std::stoi(value);
      else if (key == "atlas_size") cfg.atlas_size = std::stoi(value);
      else if (key == "ssim_window") cfg.ssim_window = std::stoi(value);
      else if (key == "alpha_screen") cfg.alpha_screen = std::stod(value);
      else if (key == "cg_tol") cfg.cg_tol = std::stod(value);
      else if (key == "holdout_stride") cfg.holdout_stride = std::stoi(value);
      else if (key == "workers") cfg.workers = std::stoi(value);
      else if (key == "use_ppm") cfg.use_ppm = value == "1" || value == "true";
      else if (key == "selective") cfg.selective = value == "1" || value == "true";
      else if (key == "enable_quality") cfg.enable_quality = value == "1" || value == "true";
      else if (key == "enable_local") cfg.enable_local = value == "1" || value == "true";
      else if (key == "color_correction") cfg.color_correction = value == "1" || value == "true";
      else if (key == "debug_overlays") cfg.debug_overlays = value == "1" || value == "true";
      else if (key == "edge_samples") cfg.edge_samples = std::stoi(value);
      else if (key == "face_samples_u") cfg.face_samples_u = std::stoi(value);
      else if (key == "face_samples_v") cfg.face_samples_v = std::stoi(value);
      else if (key == "ransac_inlier_m") cfg.ransac_inlier_m = std::stod(value);
      else if (key == "shot_stride") cfg.shot_stride = std::stoi(value);
      else if (key == "shot_radius_factor") cfg.shot_radius_factor = std::stod(value);
      else throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
  }

  // Everything that determines the outputs, in sorted key order.
  std::string settings_text() const {
    char buf[256];
    std::string s;
    auto add = [&](const char* key, const std::string& value) {
      s += key;
      s += "=";
      s += value;
      s += "\n";
    };
    auto addf = [&](const char* key, double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      add(key, buf);
    };
    auto addi = [&](const char* key, long long v) { add(key, std::to_string(v)); };
    addf("alpha_screen", alpha_screen);
    addi("atlas_size", atlas_size);
    addf("cg_tol", cg_tol);
    addi("color_correction", color_correction);
    addf("delta_fg", tex.delta_fg);
    addf("delta_occ", tex.delta_occ);
    addi("edge_samples", edge_samples);
    addi("enable_local", enable_local);
    addi("enable_quality", enable_quality);
    addi("face_samples_u", face_samples_u);
    addi("face_samples_v", face_samples_v);
    addf("gd_step_px", tex.gd_step_px);
    addi("gd_steps", tex.gd_steps);
    addi("holdout_stride", holdout_stride);
    addi("iters_full", tex.iters_full);
    addi("iters_sampled", tex.iters_sampled);
    addf("lambda", params.lambda);
    addf("omega_g", params.omega_g);
    addf("omega_s", params.omega_s);
    addf("omega_t", params.omega_t);
    addi("prune", prune);
    addi("proxy_res", tex.proxy_res);
    addf("ransac_inlier_m", ransac_inlier_m);
    addi("sample_stride", tex.sample_stride);
    addi("seed", (long long)seed);
    addi("selective", selective);
    addi("shot_stride", effective_shot_stride());
    addf("shot_radius_factor", shot_radius_factor);
    addi("solver_max_outer", solver_max_outer);
    addi("solver_sweep_cap", solver_sweep_cap);
    addf("solver_tol", solver_tol);
    addi("ssim_window", ssim_window);
    addf("theta_b", params.theta_b);
    addf("theta_n", params.theta_n);
    addf("theta_omega", params.theta_omega);
    addf("w_bg", tex.w_bg);
    return s;
  }
};

struct PipelineInputs {
  MeshSequence seq;
  FrameStream stream;
  uint64_t content_hash = 0;
};

inline PipelineInputs load_inputs(const RunConfig& cfg) {
  PipelineInputs in;
  if (cfg.mesh_path.empty() || cfg.stream_dir.empty() || cfg.positions_dir.empty())
    throw ConfigError("mesh, stream and positions paths are required");
  try {
    in.seq.base = read_mesh_obj(cfg.mesh_path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("mesh: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("mesh: ") + e.what());
  }
  in.stream = read_stream(cfg.stream_dir);
  Fnv1a h;
  h.update_pod(hash_file(cfg.mesh_path));
  for (int t = 0;; ++t) {
    std::string path = cfg.positions_dir + "/" + frame_name("pos", t, "txt");
    if (!fs::exists(path)) break;
    auto pos = read_positions(path);
    if (int(pos.size()) != in.seq.base.vertex_count())
      throw ConfigError("positions " + path + ": vertex count mismatch");
    in.seq.frame_positions.push_back(std::move(pos));
    h.update_pod(hash_file(path));
  }
  if (in.seq.frame_count() != in.stream.frame_count())
    throw ConfigError("frame count mismatch between positions and stream");
  in.seq.validate();
  for (int t = 0; t < in.stream.frame_count(); ++t) {
    std::string base = cfg.stream_dir + "/" + frame_name("color", t, "png");
    if (!fs::exists(base)) base = cfg.stream_dir + "/" + frame_name("color", t, "ppm");
    h.update_pod(hash_file(base));
    std::string dep = cfg.stream_dir + "/" + frame_name("depth", t, "png");
    if (!fs::exists(dep)) dep = cfg.stream_dir + "/" + frame_name("depth", t, "pgm");
    h.update_pod(hash_file(dep));
  }
  h.update_pod(hash_file(cfg.stream_dir + "/camera.txt"));
  in.content_hash = h.digest();
  return in;
}

namespace detail {

inline bool cache_fresh(const std::string& artifact, const std::string& key_path,
                        uint64_t key) {
  if (!fs::exists(artifact) || !fs::exists(key_path)) return false;
  return read_text_file(key_path) == hex64(key);
}

inline void store_key(const std::string& key_path, uint64_t key) {
  write_text_file(key_path, hex64(key));
}

struct StageTimer {
  const char* name;
  std::chrono::steady_clock::time_point start;
  explicit StageTimer(const char* n) : name(n), start(std::chrono::steady_clock::now()) {
    std::printf("[stage] %s ...\n", name);
    std::fflush(stdout);
  }
  ~StageTimer() {
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[stage] %s done in %.2fs\n", name, secs);
    std::fflush(stdout);
  }
};

}  // namespace detail

inline void apply_workers(const RunConfig& cfg) {
#ifdef _OPENMP
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
#endif
}

struct StageOutputs {
  TexCoordTable table;
  LabelField labels;
  TextureVolume volume;
  bool texopt_cached = false, label_cached = false, assemble_cached = false;
};

inline uint64_t texopt_key(const RunConfig& cfg, const PipelineInputs& in) {
  Fnv1a h;
  h.update_pod(in.content_hash);
  h.update("texopt");
  h.update(cfg.settings_text());
  return h.digest();
}

inline TexCoordTable stage_texopt(const RunConfig& cfg, const PipelineInputs& in,
                                  const VisibilityData& vis, bool* cached = nullptr) {
  fs::create_directories(cfg.out_dir);
  std::string artifact = cfg.out_dir + "/texcoords.bin";
  std::string key_path = artifact + ".key";
  uint64_t key = texopt_key(cfg, in);
  if (detail::cache_fresh(artifact, key_path, key)) {
    if (cached) *cached = true;
    return read_texcoord_table(artifact);
  }
  detail::StageTimer timer("texopt");
  auto holdout = cfg.holdout_mask(in.seq.frame_count());
  TexCoordResult res = optimize_texcoords(in.seq, in.stream, vis, cfg.tex, holdout);
  write_texcoord_table(artifact, res.table);
  detail::store_key(key_path, key);
  if (cfg.debug_overlays) {
    fs::create_directories(cfg.out_dir + "/overlays");
    for (int t = 0; t < in.seq.frame_count(); ++t)
      write_png_rgb8(cfg.out_dir + "/overlays/" + frame_name("overlay", t, "png"),
                     texcoord_overlay(in.stream.colors[t], res.table, t));
  }
  if (cached) *cached = false;
  return res.table;
}

inline uint64_t label_key(const RunConfig& cfg, const PipelineInputs& in) {
  Fnv1a h;
  h.update_pod(texopt_key(cfg, in));
  h.update("label");
  return h.digest();
}

inline LabelField stage_label(const RunConfig& cfg, const PipelineInputs& in,
                              const VisibilityData& vis, const TexCoordTable& table,
                              const AtlasLayout& layout, bool* cached = nullptr) {
  fs::create_directories(cfg.out_dir);
  std::string artifact = cfg.out_dir + "/labels.bin";
  std::string key_path = artifact + ".key";
  uint64_t key = label_key(cfg, in);
  if (detail::cache_fresh(artifact, key_path, key)) {
    if (cached) *cached = true;
    return read_label_field(artifact);
  }
  detail::StageTimer timer("label");
  auto holdout = cfg.holdout_mask(in.seq.frame_count());

  CostBuildOptions opts;
  opts.edge_samples = cfg.edge_samples;
  opts.face_samples_u = cfg.face_samples_u;
  opts.face_samples_v = cfg.face_samples_v;
  opts.ssim_window = cfg.ssim_window;
  opts.prune = cfg.prune;
  opts.seed = cfg.seed;
  opts.ransac_inlier_m = cfg.ransac_inlier_m;
  opts.enable_quality = cfg.enable_quality;
  opts.selective_weighting = cfg.selective;
  opts.enable_local = cfg.enable_local;
  opts.shot_stride = cfg.effective_shot_stride();
  opts.shot_radius_factor = cfg.shot_radius_factor;

  CostTables tables =
      build_cost_tables(in.seq, in.stream, table, vis, layout, cfg.params, opts, holdout);

  MrfGraph graph = build_graph(in.seq.base, in.seq.frame_count());
  LabelField init = initialize_labels(tables);
  SolveOptions sopts;
  sopts.max_outer = cfg.solver_max_outer;
  sopts.tol = cfg.solver_tol;
  sopts.sweep_cap = cfg.solver_sweep_cap;
  sopts.seed = cfg.seed;
  LabelField field = solve(graph, tables, sopts, init);

  write_label_field(artifact, field);
  detail::store_key(key_path, key);

  // per-term breakdown of the final labeling
  {
    double e_qual = 0, e_glo = 0, e_loc = 0, e_spa = 0, e_temp = 0;
    for (int f = 0; f < tables.F; ++f) {
      const auto& L = tables.cand.frames[f];
      for (int t = 0; t < tables.T; ++t) {
        int li = tables.cand.index_of(f, field.labels[f][t]);
        e_qual += tables.qual[f][li];
        e_glo += cfg.params.omega_g * tables.eglo.at(t, L[li]);
        if (tables.has_local)
          e_loc += (1 - cfg.params.omega_g) *
                   local_similarity(f, t, L[li], in.seq.base, tables.vdots);
      }
      for (int t = 0; t + 1 < tables.T; ++t)
        e_temp += cfg.params.lambda * cfg.params.omega_t *
                  tables.temporal_at(f, tables.cand.index_of(f, field.labels[f][t]),
                                     tables.cand.index_of(f, field.labels[f][t + 1]));
    }
    for (size_t e = 0; e < tables.edges.size(); ++e) {
      const auto& et = tables.edges[e];
      for (int t = 0; t < tables.T; ++t)
        e_spa += cfg.params.lambda * cfg.params.omega_s * et.mult *
                 tables.spatial_at(int(e), tables.cand.index_of(et.f0, field.labels[et.f0][t]),
                                   tables.cand.index_of(et.f1, field.labels[et.f1][t]));
    }
    char buf[512];
    std::string rep;
    std::snprintf(buf, sizeof(buf),
                  "quality %.9f\nglobal %.9f\nlocal %.9f\nspatial %.9f\ntemporal %.9f\n"
                  "total %.9f\nouter_iterations %zu\n",
                  e_qual, e_glo, e_loc, e_spa, e_temp, total_energy(field.labels, tables),
                  field.energy_trace.size() - 1);
    rep += buf;
    rep += "energy_trace";
    for (double v : field.energy_trace) {
      std::snprintf(buf, sizeof(buf), " %.9f", v);
      rep += buf;
    }
    rep += "\n";
    write_text_file(cfg.out_dir + "/energy_report.txt", rep);
  }

  CoverageReport cov = coverage_report(&field, tables.cand, tables.T);
  write_text_file(cfg.out_dir + "/coverage.txt", cov.text());

  if (cfg.debug_overlays) {
    fs::create_directories(cfg.out_dir + "/labels_debug");
    for (int t = 0; t < tables.T; ++t)
      write_png_rgb8(cfg.out_dir + "/labels_debug/" + frame_name("labels", t, "png"),
                     label_debug_image(field, layout, t));
  }
  if (cached) *cached = false;
  return field;
}

inline uint64_t assemble_key(const RunConfig& cfg, const PipelineInputs& in) {
  Fnv1a h;
  h.update_pod(label_key(cfg, in));
  h.update("assemble");
  return h.digest();
}

inline TextureVolume stage_assemble(const RunConfig& cfg, const PipelineInputs& in,
                                    const TexCoordTable& table, const LabelField& labels,
                                    const AtlasLayout& layout, bool* cached = nullptr) {
  fs::create_directories(cfg.out_dir);
  std::string key_path = cfg.out_dir + "/volume.key";
  uint64_t key = assemble_key(cfg, in);
  std::string manifest_path = cfg.out_dir + "/volume.manifest";
  const char* ext = cfg.use_ppm ? "ppm" : "png";
  bool fresh = detail::cache_fresh(manifest_path, key_path, key);
  if (fresh)
    for (int t = 0; t < in.seq.frame_count() && fresh; ++t)
      fresh = fs::exists(cfg.out_dir + "/" + frame_name("slice", t, ext));
  if (fresh) {
    TextureVolume vol;
    vol.size = cfg.atlas_size;
    vol.slices.resize(in.seq.frame_count());
    for (int t = 0; t < in.seq.frame_count(); ++t) {
      std::string path = cfg.out_dir + "/" + frame_name("slice", t, ext);
      vol.slices[t] = cfg.use_ppm ? read_ppm(path) : read_png_rgb8(path);
    }
    vol.manifest = read_text_file(manifest_path);
    if (cached) *cached = true;
    return vol;
  }
  detail::StageTimer timer("assemble");
  TextureVolume vol = assemble(labels, table, in.stream, in.seq.base, layout);
  double seam_pre = 0, seam_post = 0;
  for (int t = 0; t < int(vol.slices.size()); ++t)
    seam_pre += seam_metric(vol.slices[t], vol.source_labels[t]);
  if (cfg.color_correction) {
    ColorCorrectOptions copts;
    copts.alpha_screen = cfg.alpha_screen;
    copts.cg_tol = cfg.cg_tol;
    vol = color_correct(vol, copts);
  }
  for (int t = 0; t < int(vol.slices.size()); ++t)
    seam_post += seam_metric(vol.slices[t], vol.source_labels[t]);
  int T = int(vol.slices.size());
  seam_pre /= std::max(1, T);
  seam_post /= std::max(1, T);

  // manifest pins the configuration, inputs and outputs
  std::string manifest;
  manifest += "volume v1\n";
  manifest += "atlas_size=" + std::to_string(vol.size) + "\n";
  manifest += "frames=" + std::to_string(T) + "\n";
  manifest += "input_hash=" + hex64(in.content_hash) + "\n";
  manifest += cfg.settings_text();
  {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "seam_metric_pre=%.9f\nseam_metric_post=%.9f\n",
                  seam_pre, seam_post);
    manifest += buf;
  }
  for (int t = 0; t < T; ++t) {
    std::string path = cfg.out_dir + "/" + frame_name("slice", t, ext);
    if (cfg.use_ppm)
      write_ppm(path, vol.slices[t]);
    else
      write_png_rgb8(path, vol.slices[t]);
    manifest += "slice_hash " + std::to_string(t) + " " + hex64(hash_file(path)) + "\n";
  }
  vol.manifest = manifest;
  write_text_file(manifest_path, manifest);
  detail::store_key(key_path, key);
  if (cached) *cached = false;
  return vol;
}

struct EvalReport {
  double psnr_all = 0;
  double psnr_heldout = 0;  // 0 when no holdout configured
  double blur_input = 0;
  double blur_slices = 0;
  double naive_coverage = 0;
  std::string text;
  std::string csv;
};

inline EvalReport stage_eval(const RunConfig& cfg, const PipelineInputs& in,
                             const VisibilityData& vis, const TextureVolume& vol) {
  detail::StageTimer timer("eval");
  EvalReport rep;
  const int T = in.seq.frame_count();
  auto holdout = cfg.holdout_mask(T);

  std::vector<double> psnr(T, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T; ++t) {
    std::vector<uint8_t> footprint;
    Image8 render = render_textured(in.seq.frame_positions[t], in.seq.base,
                                    in.stream.camera, vol.slices[t], &footprint);
    psnr[t] = psnr_patch(render, in.stream.colors[t], footprint);
  }
  double sum_all = 0, sum_held = 0;
  int n_held = 0;
  for (int t = 0; t < T; ++t) {
    sum_all += psnr[t];
    if (!holdout.empty() && holdout[t]) {
      sum_held += psnr[t];
      ++n_held;
    }
  }
  rep.psnr_all = sum_all / std::max(1, T);
  rep.psnr_heldout = n_held > 0 ? sum_held / n_held : 0.0;

  double bi = 0, bs = 0;
  for (int t = 0; t < T; ++t) {
    bi += blurriness(in.stream.colors[t]);
    bs += blurriness(vol.slices[t]);
  }
  rep.blur_input = bi / std::max(1, T);
  rep.blur_slices = bs / std::max(1, T);

  CandidateSets cand = CandidateSets::from_visibility(vis, holdout);
  rep.naive_coverage = coverage_report(nullptr, cand, T).naive_fraction;

  char buf[256];
  std::string text;
  std::snprintf(buf, sizeof(buf), "psnr_all_frames %.4f\n", rep.psnr_all);
  text += buf;
  if (n_held > 0) {
    std::snprintf(buf, sizeof(buf), "psnr_heldout %.4f (stride %d, %d frames)\n",
                  rep.psnr_heldout, cfg.holdout_stride, n_held);
    text += buf;
  }
  std::snprintf(buf, sizeof(buf), "blurriness_input %.6f\n", rep.blur_input);
  text += buf;
  std::snprintf(buf, sizeof(buf), "blurriness_slices %.6f\n", rep.blur_slices);
  text += buf;
  std::snprintf(buf, sizeof(buf), "naive_coverage %.6f\n", rep.naive_coverage);
  text += buf;
  rep.text = text;

  std::string csv = "frame,psnr,held_out,blur_input,blur_slice\n";
  for (int t = 0; t < T; ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.4f,%d,%.6f,%.6f\n", t, psnr[t],
                  holdout.empty() ? 0 : int(holdout[t]), blurriness(in.stream.colors[t]),
                  blurriness(vol.slices[t]));
    csv += buf;
  }
  rep.csv = csv;
  write_text_file(cfg.out_dir + "/report.txt", text);
  write_text_file(cfg.out_dir + "/report.csv", csv);
  return rep;
}

// Fig-1-order pipeline with content-keyed stage caching.
inline StageOutputs run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  apply_workers(cfg);
  PipelineInputs in = load_inputs(cfg);
  VisibilityData vis = compute_visibility(in.seq, in.stream, cfg.tex);
  AtlasLayout layout = build_atlas_layout(in.seq.base, cfg.atlas_size);
  StageOutputs out;
  out.table = stage_texopt(cfg, in, vis, &out.texopt_cached);
  out.labels = stage_label(cfg, in, vis, out.table, layout, &out.label_cached);
  out.volume =
      stage_assemble(cfg, in, out.table, out.labels, layout, &out.assemble_cached);
  stage_eval(cfg, in, vis, out.volume);
  return out;
}

// Scene generation entry used by the CLI: writes the standard input layout
// plus ground truth.
inline void write_scene(const std::string& out_dir, const Scene& scene, int gt_atlas,
                        bool use_ppm = false) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/stream");
  fs::create_directories(out_dir + "/positions");
  fs::create_directories(out_dir + "/ground_truth");
  write_mesh_obj(out_dir + "/mesh.obj", scene.seq.base);
  write_stream(out_dir + "/stream", scene.stream, use_ppm);
  for (int t = 0; t < scene.seq.frame_count(); ++t)
    write_positions(out_dir + "/positions/" + frame_name("pos", t, "txt"),
                    scene.seq.frame_positions[t]);
  const GroundTruth& gt = scene.truth;
  for (int t = 0; t < int(gt.true_atlases.size()); ++t)
    write_png_rgb8(out_dir + "/ground_truth/" + frame_name("atlas", t, "png"),
                   gt.true_atlases[t]);
  (void)gt_atlas;
  std::string dyn;
  for (int f = 0; f < int(gt.dynamic_faces.size()); ++f)
    if (gt.dynamic_faces[f]) dyn += std::to_string(f) + "\n";
  write_text_file(out_dir + "/ground_truth/dynamic_faces.txt", dyn);
  std::string sw;
  for (int t : gt.switch_frames) sw += std::to_string(t) + "\n";
  write_text_file(out_dir + "/ground_truth/switch_frames.txt", sw);
  std::string bl;
  for (int t = 0; t < int(gt.blur_frames.size()); ++t)
    if (gt.blur_frames[t]) bl += std::to_string(t) + "\n";
  write_text_file(out_dir + "/ground_truth/blur_frames.txt", bl);
  std::ofstream drift(out_dir + "/ground_truth/drift.bin", std::ios::binary);
  int T = int(gt.drift_px.size());
  int V = T > 0 ? int(gt.drift_px[0].size()) : 0;
  drift << "drift v1 " << T << " " << V << "\n";
  for (const auto& frame : gt.drift_px)
    for (const auto& d : frame) {
      float xy[2] = {float(d.x()), float(d.y())};
      drift.write(reinterpret_cast<const char*>(xy), sizeof(xy));
    }
}

}  // namespace textvol
