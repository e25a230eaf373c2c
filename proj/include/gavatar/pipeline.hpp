#pragma once

#include "gavatar/avatar.hpp"
#include "gavatar/region_init.hpp"
#include "gavatar/synth.hpp"
#include "gavatar/trainer.hpp"

#include <cstdint>
#include <vector>

namespace gavatar {

struct ModelSpec {
  RegionProfile profile;
  FieldConfig field;
  int prior_resolution = 512;
  double box_padding = 0.15;
  std::uint64_t seed = 0;
};

/// Region-aware cloud, priors and a freshly initialised field for a mesh.
AvatarModel<double> build_model(const CanonicalMesh& mesh, const Rig& rig, const ModelSpec& spec);
/// Same, with priors rendered earlier.
AvatarModel<double> build_model(const CanonicalMesh& mesh, const Rig& rig, const ModelSpec& spec,
                                std::shared_ptr<const PriorPack> priors);

/// Bands sized for the small synthetic capsule.
FieldConfig bundled_field_config();

struct Dataset {
  std::vector<TrainSample> train;
  std::vector<TrainSample> test;
};

/// Every pose seen from every training camera, and every pose from the
/// held-out camera. Targets come from the reference renderer.
Dataset make_dataset(const SyntheticScene& scene, const RenderSettings& settings);

}  // namespace gavatar
