#pragma once

#include "gavatar/avatar.hpp"
#include "gavatar/mesh.hpp"
#include "gavatar/trainer.hpp"

#include <cstdint>
#include <vector>

namespace gavatar {

/// Procedural two-bone capsule avatar with labelled caps.
struct SynthConfig {
  std::uint64_t seed = 7;
  int image_size = 128;
  int poses = 10;
  int train_cameras = 6;
  double fps = 10.0;
  double radius = 0.15;
  double height = 1.0;
  int segments = 12;     // vertices around the capsule
  int cap_rings = 3;     // rings per cap, pole excluded
  int body_rings = 5;
  int gt_primitives = 3000;
  double camera_distance = 2.6;
  double fov_y_deg = 30.0;
  double max_bend_deg = 50.0;
  // Scripted dimming around the bending joint; 0 disables it.
  double dimming = 0.0;
  int prior_resolution = 512;
};

struct SyntheticScene {
  SynthConfig config;
  CanonicalMesh mesh;
  Rig rig;
  std::vector<PoseFrame> poses;
  std::vector<Camera> cameras;  // training cameras first, then the held-out one
  int train_camera_count = 0;
  GaussianCloud<double> ground_truth;

  double t_min() const { return poses.front().t; }
  double t_max() const { return poses.back().t; }
};

CanonicalMesh make_capsule_mesh(const SynthConfig& cfg);
/// Root at the bottom of the capsule, one child at mid-height.
Rig make_capsule_rig(const SynthConfig& cfg);
/// Joint weight of the upper bone as a function of height.
double upper_bone_weight(double y, const SynthConfig& cfg);
std::vector<PoseFrame> make_pose_script(const SynthConfig& cfg);
std::vector<Camera> make_camera_ring(const SynthConfig& cfg);
/// Surface albedo for a canonical point and outward normal.
Vec3d capsule_texture(const Vec3d& p, const Vec3d& n, const SynthConfig& cfg);
/// Per-primitive dimming of the ground truth at a pose.
double scripted_ao(const Vec3d& x0, const PoseFrame& pose, const SynthConfig& cfg);

SyntheticScene make_synthetic_scene(const SynthConfig& cfg);

/// Ground-truth image from the brute-force reference renderer.
Image<double> render_ground_truth(const SyntheticScene& scene, int pose, int camera,
                                  const RenderSettings& settings);

}  // namespace gavatar
