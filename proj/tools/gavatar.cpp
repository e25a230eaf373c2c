#include "gavatar/io.hpp"
#include "gavatar/project.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace gavatar;
using nlohmann::json;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::InvalidParameter: return 2;
    case ErrorKind::Divergence:
    case ErrorKind::NonFinite: return 4;
    default: return 3;
  }
}

int report(const char* kind, const std::string& msg, int code) {
  std::cerr << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-aware Gaussian avatar: synth, init, train, render, eval, ablate"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  int threads = 0;
  bool use_double = false;
  bool no_hash_sh = false, no_hash_vd = false, no_depth = false, no_normals = false;
  bool no_multiscale = false, no_ao = false;
  std::optional<int> iterations;

  app.add_option("--config", config_path, "Project config (JSON); defaults are used when omitted");
  app.add_option("--seed", seed, "Override the project seed");
  app.add_option("--output", output, "Override the output directory");
  app.add_option("--threads", threads, "Cap the OpenMP thread count (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--double", use_double, "Run in double precision");
  app.add_flag("--no-hash-sh", no_hash_sh, "Per-primitive SH instead of field SH");
  app.add_flag("--no-hash-vd", no_hash_vd, "Disable the displacement field");
  app.add_flag("--no-depth", no_depth, "Drop the depth prior input");
  app.add_flag("--no-normals", no_normals, "Drop the normal prior input");
  app.add_flag("--no-multiscale", no_multiscale, "Low band only");
  app.add_flag("--no-ao", no_ao, "Disable ambient occlusion");
  app.add_option("--iterations", iterations, "Override the training iteration count");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
  auto* init = app.add_subcommand("init", "Build the initial region-aware cloud");
  auto* train_cmd = app.add_subcommand("train", "Train from the initial checkpoint");
  auto* render = app.add_subcommand("render", "Render a checkpoint to PNG and float images");
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM on the held-out frames");
  auto* ablate = app.add_subcommand("ablate", "Train and compare the ablation variants");
  auto* show = app.add_subcommand("config", "Print the effective config");

  int pose = -1, camera = -1;
  std::string checkpoint, images;
  render->add_option("--pose", pose, "Pose index (-1 = all)");
  render->add_option("--camera", camera, "Camera index (-1 = all)");
  render->add_option("--checkpoint", checkpoint, "Checkpoint (default: model/model.bin)");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: model/model.bin)");
  eval->add_option("--images", images, "Score float images in this directory instead");
  for (auto* sub : {synth, init, train_cmd, render, eval, ablate, show}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 2);
  }

  try {
    ProjectConfig cfg = config_path.empty() ? ProjectConfig{} : load_project_config(config_path);
    if (seed) cfg.seed = *seed;
    if (output) cfg.output_dir = *output;
    if (iterations) {
      cfg.train.iterations = *iterations;
      cfg.train.ao_freeze_iters = std::min(cfg.train.ao_freeze_iters, *iterations);
    }
    if (use_double) cfg.use_double = true;
    if (no_hash_sh) cfg.switches.hash_sh = false;
    if (no_hash_vd) cfg.switches.hash_vd = false;
    if (no_depth) cfg.switches.depth = false;
    if (no_normals) cfg.switches.normals = false;
    if (no_multiscale) cfg.switches.multiscale = false;
    if (no_ao) cfg.switches.ao = false;
    cfg = ProjectConfig::from_json(cfg.to_json());
    if (threads > 0) omp_set_num_threads(threads);

    if (*show) {
      std::cout << cfg.to_json().dump(2) << std::endl;
    } else if (*synth) {
      const json m = run_synth(cfg);
      std::cout << json{{"command", "synth"},
                        {"frames", m["frames"]},
                        {"cameras", m["cameras"]},
                        {"dataset_hash", m["dataset_hash"]}}
                       .dump()
                << std::endl;
    } else if (*init) {
      const RegionCounts c = run_init(cfg);
      std::cout << json{{"command", "init"},
                        {"primitives", c.total()},
                        {"torso", c.torso},
                        {"face", c.face},
                        {"hand", c.hand}}
                       .dump()
                << std::endl;
    } else if (*train_cmd) {
      const TrainResult r = run_train(cfg);
      for (const auto& rec : r.curve)
        std::cout << json{{"iteration", rec.iteration}, {"loss", rec.loss}, {"psnr", rec.psnr}}.dump()
                  << "\n";
      std::cout << json{{"command", "train"}, {"iterations", cfg.train.iterations}}.dump()
                << std::endl;
    } else if (*render) {
      const auto files = run_render(cfg, pose, camera, checkpoint);
      std::cout << json{{"command", "render"}, {"images", files.size()}}.dump() << std::endl;
    } else if (*eval) {
      std::optional<std::filesystem::path> dir;
      if (!images.empty()) dir = images;
      const auto rows = run_eval(cfg, dir, checkpoint);
      double p = 0.0, s = 0.0;
      for (const auto& r : rows) {
        p += r.psnr / double(rows.size());
        s += r.ssim / double(rows.size());
      }
      std::cout << json{{"command", "eval"}, {"frames", rows.size()}, {"psnr", p}, {"ssim", s}}.dump()
                << std::endl;
    } else if (*ablate) {
      const AblationResult res = run_ablate(cfg);
      std::printf("%-16s %9s %8s\n", "variant", "PSNR", "SSIM");
      for (const auto& r : res.rows) std::printf("%-16s %9.3f %8.4f\n", r.name.c_str(), r.psnr, r.ssim);
      std::printf("full model best: %s\n", res.full_is_best ? "yes" : "no");
    }
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report("internal", e.what(), 3);
  }
  return 0;
}
