#include "gavatar/pipeline.hpp"

namespace gavatar {

AvatarModel<double> build_model(const CanonicalMesh& mesh, const Rig& rig, const ModelSpec& spec) {
  return build_model(mesh, rig, spec,
                     std::make_shared<const PriorPack>(render_priors(mesh, spec.prior_resolution)));
}

AvatarModel<double> build_model(const CanonicalMesh& mesh, const Rig& rig, const ModelSpec& spec,
                                std::shared_ptr<const PriorPack> priors) {
  require(priors != nullptr, ErrorKind::InvalidParameter, "priors are required");
  priors->validate();
  mesh.validate();
  require(mesh.joint_count() == rig.joint_count(), ErrorKind::Validation,
          "mesh weights have " + std::to_string(mesh.joint_count()) + " joints, rig has " +
              std::to_string(rig.joint_count()));
  require(spec.profile.sh_degree == spec.field.sh_degree, ErrorKind::Config,
          "profile and field SH degrees differ");
  AvatarModel<double> m;
  m.rig = rig;
  m.joints.assign(rig.rest_positions().begin(), rig.rest_positions().end());
  m.cloud = initialize_cloud(mesh, spec.profile, rig.joint_count());
  const BoundingBox box = mesh.bounds().padded(spec.box_padding);
  m.field = MultiScaleHashField<double>(spec.field, box, spec.seed);
  m.priors = std::move(priors);
  return m;
}

FieldConfig bundled_field_config() {
  FieldConfig c;
  c.low = HashBandConfig{4, 4, 1.5, 14, 2};
  c.high = HashBandConfig{4, 24, 1.5, 14, 2};
  return c;
}

Dataset make_dataset(const SyntheticScene& scene, const RenderSettings& settings) {
  Dataset d;
  const int n_cam = static_cast<int>(scene.cameras.size());
  for (int p = 0; p < static_cast<int>(scene.poses.size()); ++p) {
    for (int c = 0; c < n_cam; ++c) {
      TrainSample s;
      s.frame.pose = scene.poses[p];
      s.frame.camera = scene.cameras[c];
      s.frame.t_norm = normalize_time(s.frame.pose.t, scene.t_min(), scene.t_max());
      s.target = render_ground_truth(scene, p, c, settings).cast<float>();
      (c < scene.train_camera_count ? d.train : d.test).push_back(std::move(s));
    }
  }
  return d;
}

}  // namespace gavatar
