#pragma once

#include "gavatar/cloud.hpp"
#include "gavatar/field.hpp"
#include "gavatar/priors.hpp"
#include "gavatar/render.hpp"
#include "gavatar/rig.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gavatar {

struct RenderSettings {
  RasterSettings raster;
  int tile_size = 16;
  Vec3d background = Vec3d::Zero();
  // Re-orthonormalise the blended bone map before it rotates the covariance.
  bool polar = false;
};

struct FrameInput {
  PoseFrame pose;
  double t_norm = 0.0;
  Camera camera;
  bool ao_frozen = false;
};

struct RenderReport {
  int primitives = 0;
  int visible = 0;
  int culled = 0;
  int singular_blend = 0;
  long rejected = 0;

  std::string to_json() const;
};

/// Everything a render needs: the canonical cloud, the skeleton and its
/// (optimisable) joint positions, the residual field and the priors.
template <typename S> struct AvatarModel {
  Rig rig;
  std::vector<Vec3<S>> joints;
  GaussianCloud<S> cloud;
  MultiScaleHashField<S> field;
  std::shared_ptr<const PriorPack> priors;
  FieldSwitches switches;
  bool optimize_joints = true;

  void validate() const;
  template <typename T> AvatarModel<T> cast() const;
};

/// Per-frame canonical attributes after the field: offsets, SH blocks, ao.
template <typename S> struct PrimitiveAttributes {
  MatX<S> offset;  // N x 3
  MatX<S> sh;      // N x 3C
  VecX<S> ao;      // N
};

template <typename S> struct FieldCache {
  bool decoder_used = false;
  bool ao_used = false;
  MatX<S> z;
  typename Mlp<S>::Cache decoder;
  MatX<S> decoder_out;
  MatX<S> ao_in;
  typename Mlp<S>::Cache ao_decoder;
};

template <typename S> struct PrimitiveState {
  Vec3<S> x_canonical;
  Vec3<S> x_posed;
  Mat3<S> blend;       // sum_i w_i linear(B_i)
  Mat3<S> cov_map;     // blend or its polar factor
  Mat3<S> rotation;    // canonical rotation from the raw quaternion
  Vec3<S> scale;
  Vec3<S> dir_posed;
  Vec3<S> dir_pre;     // blend^-1 dir_posed before normalisation
  Vec3<S> dir_canonical;
  S view_distance = S(0);
  bool singular = false;
  Vec3<S> color_raw;   // SH colour before clamping
  S alpha0 = S(0);
  int splat = -1;
  ProjectionCache<S> projection;
};

template <typename S> struct SplatCache {
  BoneTransforms<S> bones;
  std::vector<PrimitiveState<S>> states;
  std::vector<Splat2D<S>> splats;
  RasterCache<S> raster;
};

template <typename S> struct AvatarCache {
  PrimitiveAttributes<S> attributes;
  FieldCache<S> field;
  SplatCache<S> splat;
  RenderReport report;
};

/// Gradients mirroring every optimisable group of an AvatarModel.
template <typename S> struct GradientSet {
  MatX<S> position;
  MatX<S> rotation;
  MatX<S> scale_raw;
  VecX<S> opacity_logit;
  MatX<S> sh;
  std::vector<Vec3<S>> joints;
  VecX<S> low;
  VecX<S> high;
  VecX<S> decoder;
  VecX<S> ao_decoder;

  static GradientSet zeros_like(const AvatarModel<S>& m);
  void add(const GradientSet& o, S scale = S(1));
  /// Empty when every entry is finite, otherwise "group[index]".
  std::string first_non_finite() const;
  S max_abs() const;
};

/// Runs the field for every primitive of the model.
template <typename S>
PrimitiveAttributes<S> evaluate_attributes(const AvatarModel<S>& model, double t_norm,
                                           bool ao_frozen, FieldCache<S>* cache = nullptr);

/// Skins, shades, projects and rasterises a cloud with the given per-frame
/// attributes. `reference` selects the brute-force rasteriser.
template <typename S>
Image<S> render_attributes(const Rig& rig, std::span<const Vec3<S>> joints,
                           const GaussianCloud<S>& cloud, const PrimitiveAttributes<S>& attrs,
                           const FrameInput& frame, const RenderSettings& settings,
                           SplatCache<S>* cache = nullptr, RenderReport* report = nullptr,
                           bool reference = false);

template <typename S>
Image<S> render_avatar(const AvatarModel<S>& model, const FrameInput& frame,
                       const RenderSettings& settings, AvatarCache<S>* cache = nullptr,
                       bool reference = false);

/// Reverse pass of render_avatar for dL/dimage, using the cache from the
/// forward call (which must not have used the reference rasteriser).
template <typename S>
GradientSet<S> avatar_backward(const AvatarModel<S>& model, const FrameInput& frame,
                               const RenderSettings& settings, const AvatarCache<S>& cache,
                               const Image<S>& d_image);

}  // namespace gavatar
