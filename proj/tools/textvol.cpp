#include <CLI11.hpp>

#include <cstdio>
#include <exception>

#include "textvol/textvol.hpp"

namespace {

using namespace textvol;

struct CommonArgs {
  std::string config;
  std::string out;
  int workers = -1;
  long long seed = -1;
  int atlas_size = -1;
  int holdout_stride = -1;
  int prune = -1;
  bool ppm = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool config_required = true) {
  auto* opt = cmd->add_option("--config", args->config, "key=value configuration file");
  if (config_required) opt->required();
  cmd->add_option("--out", args->out, "output directory (overrides config)");
  cmd->add_option("--workers", args->workers, "worker thread count (0 = default)");
  cmd->add_option("--seed", args->seed, "random seed (overrides config)");
  cmd->add_option("--atlas-size", args->atlas_size, "texture slice side length");
  cmd->add_option("--holdout-stride", args->holdout_stride,
                  "exclude every k-th frame from reconstruction");
  cmd->add_option("--prune", args->prune, "candidate label cap per face (0 = off)");
  cmd->add_flag("--ppm", args->ppm, "write raw ppm instead of png");
}

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = RunConfig::from_kv(parse_keyvalue_file(args.config));
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.workers >= 0) cfg.workers = args.workers;
  if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
  if (args.atlas_size > 0) cfg.atlas_size = args.atlas_size;
  if (args.holdout_stride >= 0) cfg.holdout_stride = args.holdout_stride;
  if (args.prune >= 0) cfg.prune = args.prune;
  if (args.ppm) cfg.use_ppm = true;
  cfg.validate();
  return cfg;
}

int dispatch(const std::string& command, const CommonArgs& args,
             const std::string& scene_spec_path, int gt_atlas) {
  if (command == "synth") {
    SceneSpec spec = scene_spec_from_kv(parse_keyvalue_file(scene_spec_path));
    std::string out = args.out.empty() ? "scene" : args.out;
    if (args.seed >= 0) spec.seed = uint64_t(args.seed);
    detail::StageTimer timer("synth");
    Scene scene = generate(spec, gt_atlas);
    write_scene(out, scene, gt_atlas, args.ppm);
    std::printf("scene written to %s (%d frames, %d faces)\n", out.c_str(),
                scene.seq.frame_count(), scene.seq.base.face_count());
    return 0;
  }

  RunConfig cfg = load_config(args);
  apply_workers(cfg);
  PipelineInputs in = load_inputs(cfg);
  VisibilityData vis = compute_visibility(in.seq, in.stream, cfg.tex);
  AtlasLayout layout = build_atlas_layout(in.seq.base, cfg.atlas_size);

  if (command == "texopt") {
    stage_texopt(cfg, in, vis);
    return 0;
  }
  TexCoordTable table = stage_texopt(cfg, in, vis);
  if (command == "label") {
    stage_label(cfg, in, vis, table, layout);
    return 0;
  }
  LabelField labels = stage_label(cfg, in, vis, table, layout);
  TextureVolume vol = stage_assemble(cfg, in, table, labels, layout);
  if (command == "assemble") return 0;
  EvalReport rep = stage_eval(cfg, in, vis, vol);
  std::printf("%s", rep.text.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatiotemporal texture volume reconstruction"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string scene_spec_path;
  int gt_atlas = 512;

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--spec", scene_spec_path, "scene spec (key=value)")->required();
  synth->add_option("--out", args.out, "output directory")->required();
  synth->add_option("--seed", args.seed, "seed override");
  synth->add_option("--gt-atlas", gt_atlas, "ground-truth atlas size (0 = skip)");
  synth->add_flag("--ppm", args.ppm, "write raw ppm instead of png");

  auto* texopt = app.add_subcommand("texopt", "optimize texture coordinates");
  add_common(texopt, &args);
  auto* label = app.add_subcommand("label", "solve the source-frame labeling");
  add_common(label, &args);
  auto* assemble = app.add_subcommand("assemble", "build the texture volume");
  add_common(assemble, &args);
  auto* eval = app.add_subcommand("eval", "evaluate a reconstruction");
  add_common(eval, &args);
  auto* runall = app.add_subcommand("run-all", "run every stage");
  add_common(runall, &args);

  CLI11_PARSE(app, argc, argv);

  std::string command;
  for (auto* cmd : {synth, texopt, label, assemble, eval, runall})
    if (cmd->parsed()) command = cmd->get_name();
  if (command == "run-all") command = "eval";

  try {
    return dispatch(command, args, scene_spec_path, gt_atlas);
  } catch (const textvol::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const textvol::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const textvol::ContractError& e) {
    std::fprintf(stderr, "contract error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
