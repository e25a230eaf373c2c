#pragma once

#include "gavatar/gaussian.hpp"
#include "gavatar/mesh.hpp"
#include "gavatar/types.hpp"

#include <cmath>
#include <vector>

namespace gavatar {

/// Canonical skinned Gaussian cloud stored as parameter arrays, one row per
/// primitive. Optimised quantities use unconstrained parameterisations:
/// raw quaternions, raw scales (s = floor + exp(raw)) and pre-sigmoid
/// opacities. Skinning weights and region weights are fixed after init.
template <typename S> struct GaussianCloud {
  int sh_degree = 3;
  MatX<S> position;       // N x 3
  MatX<S> rotation;       // N x 4, raw quaternion (w, x, y, z)
  MatX<S> scale_raw;      // N x 3
  VecX<S> opacity_logit;  // N
  MatX<S> sh;             // N x 3*(deg+1)^2, channel-major
  MatX<S> weights;        // N x joints
  VecX<S> tau;            // N, region weight of the source vertex
  std::vector<int> source_vertex;
  std::vector<Region> region;

  int size() const { return static_cast<int>(position.rows()); }
  int joint_count() const { return static_cast<int>(weights.cols()); }
  int sh_block() const { return 3 * sh_coeff_count(sh_degree); }

  void resize(int n, int joints, int degree) {
    sh_degree = degree;
    position = MatX<S>::Zero(n, 3);
    rotation = MatX<S>::Zero(n, 4);
    scale_raw = MatX<S>::Zero(n, 3);
    opacity_logit = VecX<S>::Zero(n);
    sh = MatX<S>::Zero(n, 3 * sh_coeff_count(degree));
    weights = MatX<S>::Zero(n, joints);
    tau = VecX<S>::Zero(n);
    source_vertex.assign(n, 0);
    region.assign(n, Region::Torso);
  }

  Vec3<S> scale(int i) const {
    return (scale_raw.row(i).array().exp() + S(kScaleFloor)).matrix().transpose();
  }
  S opacity(int i) const { return sigmoid(opacity_logit[i]); }

  static S scale_to_raw(double s) { return S(std::log(s - kScaleFloor)); }

  template <typename T> GaussianCloud<T> cast() const {
    GaussianCloud<T> c;
    c.sh_degree = sh_degree;
    c.position = position.template cast<T>();
    c.rotation = rotation.template cast<T>();
    c.scale_raw = scale_raw.template cast<T>();
    c.opacity_logit = opacity_logit.template cast<T>();
    c.sh = sh.template cast<T>();
    c.weights = weights.template cast<T>();
    c.tau = tau.template cast<T>();
    c.source_vertex = source_vertex;
    c.region = region;
    return c;
  }

  /// Value view of primitive i (ao and displacement supplied by the caller).
  SkinnedGaussian primitive(int i, const Vec3d& displacement = Vec3d::Zero(),
                            double ao = 1.0) const {
    const Vec4<double> q = rotation.row(i).transpose().template cast<double>();
    std::vector<double> block(sh.cols());
    for (Eigen::Index k = 0; k < sh.cols(); ++k) block[k] = static_cast<double>(sh(i, k));
    std::vector<double> w(weights.cols());
    for (Eigen::Index k = 0; k < weights.cols(); ++k) w[k] = static_cast<double>(weights(i, k));
    GaussianPrimitive base(position.row(i).transpose().template cast<double>(),
                           rotation_from_raw_quat<double>(q), scale(i).template cast<double>(),
                           static_cast<double>(opacity(i)), std::move(block), sh_degree);
    return SkinnedGaussian(std::move(base), std::move(w), displacement, ao);
  }
};

}  // namespace gavatar
