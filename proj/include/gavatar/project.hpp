#pragma once

#include "gavatar/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gavatar {

/// File locations. Data files live under `data_dir`; every directory is
/// relative to the project output directory unless absolute.
struct ProjectPaths {
  std::string data_dir = "data";
  std::string model_dir = "model";
  std::string render_dir = "renders";
  std::string eval_dir = "eval";
  std::string mesh = "mesh.obj";
  std::string sidecar = "mesh.json";
  std::string rig = "rig.json";
  std::string poses = "poses.json";
  std::string cameras = "cameras.json";
  std::string priors = "priors.gapp";
  std::string targets = "targets";

  bool operator==(const ProjectPaths&) const = default;
};

/// Everything a CLI run needs. One seed drives the synthetic scene, the
/// region sampler, the field initialisation and the sample order.
struct ProjectConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "gavatar_out";
  ProjectPaths paths;
  SynthConfig synth;
  RegionProfile region;
  FieldConfig field = bundled_field_config();
  double box_padding = 0.15;
  TrainConfig train;
  RenderSettings render;
  FieldSwitches switches;
  bool use_double = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a config error.
  static ProjectConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the serialised config.
  std::string hash() const;

  std::filesystem::path out() const { return output_dir; }
  std::filesystem::path dir(const std::string& d) const;
  std::filesystem::path data(const std::string& f) const { return dir(paths.data_dir) / f; }
  std::filesystem::path target_path(int pose, int camera) const;
  ModelSpec model_spec() const;
};

ProjectConfig load_project_config(const std::filesystem::path& path);

struct LoadedDataset {
  CanonicalMesh mesh;
  Rig rig;
  std::vector<PoseFrame> poses;
  std::vector<Camera> cameras;
  int train_camera_count = 0;
  std::shared_ptr<const PriorPack> priors;
  Dataset frames;
  std::string hash;
};

/// Reads everything `run_synth` wrote. `with_targets` also loads images.
LoadedDataset load_dataset(const ProjectConfig& cfg, bool with_targets = true);

/// Scene files, priors, reference-rendered targets and a manifest.
nlohmann::json run_synth(const ProjectConfig& cfg);

/// Initial checkpoint from the dataset's mesh, rig and priors.
RegionCounts run_init(const ProjectConfig& cfg);

/// Trains from the initial checkpoint. Throws Divergence after saving the
/// last good model when training diverges.
TrainResult run_train(const ProjectConfig& cfg);

/// Renders a checkpoint for the given pose/camera (-1 = all); returns the
/// written PNG paths. Float images are written next to them.
std::vector<std::filesystem::path> run_render(const ProjectConfig& cfg, int pose = -1,
                                              int camera = -1,
                                              const std::filesystem::path& checkpoint = {});

/// PSNR/SSIM on the held-out frames. With `images` set, the float images in
/// that directory (named like the targets) are scored instead of a render.
std::vector<EvalRow> run_eval(const ProjectConfig& cfg,
                              const std::optional<std::filesystem::path>& images = std::nullopt,
                              const std::filesystem::path& checkpoint = {});

struct AblationRow {
  std::string name;
  FieldSwitches switches;
  double psnr = 0.0;
  double ssim = 0.0;
  std::string dataset_hash;
};

/// Full model first, then one row per disabled component.
std::vector<std::pair<std::string, FieldSwitches>> ablation_variants(const FieldSwitches& base);

struct AblationResult {
  std::vector<AblationRow> rows;
  bool full_is_best = false;
};

AblationResult run_ablate(const ProjectConfig& cfg);

}  // namespace gavatar
