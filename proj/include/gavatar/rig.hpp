#pragma once

#include "gavatar/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace gavatar {

/// Skeleton topology plus rest joint positions in canonical space.
/// Rest orientation of every joint is the identity. Euler angles are
/// intrinsic XYZ, i.e. R = Rx(a) * Ry(b) * Rz(c).
class Rig {
 public:
  Rig() = default;
  Rig(std::vector<int> parents, std::vector<Vec3d> rest_positions,
      std::vector<std::string> names = {});

  int joint_count() const { return static_cast<int>(parents_.size()); }
  std::span<const int> parents() const { return parents_; }
  std::span<const Vec3d> rest_positions() const { return rest_; }
  std::span<const std::string> names() const { return names_; }
  int root() const { return order_.front(); }
  /// Parents always precede children in this order.
  std::span<const int> order() const { return order_; }
  static constexpr const char* euler_order() { return "XYZ"; }

 private:
  std::vector<int> parents_;
  std::vector<Vec3d> rest_;
  std::vector<std::string> names_;
  std::vector<int> order_;
};

/// One pose: per-joint Euler angles (radians; the root entry is the global
/// rotation) and a global translation, at time t seconds.
struct PoseFrame {
  double t = 0.0;
  std::vector<Vec3d> euler;
  Vec3d translation = Vec3d::Zero();

  static PoseFrame rest(int joints, double t = 0.0) {
    return PoseFrame{t, std::vector<Vec3d>(joints, Vec3d::Zero()), Vec3d::Zero()};
  }
};

Mat3d euler_xyz_to_matrix(const Vec3d& euler);

/// Per-joint rigid transforms x -> linear[i] * x + translation[i] mapping
/// canonical space to posed space.
template <typename S> struct BoneTransforms {
  std::vector<Mat3<S>> linear;
  std::vector<Vec3<S>> translation;
  // Posed world position of each joint, kept for the J backward pass.
  std::vector<Vec3<S>> joint_world;

  int size() const { return static_cast<int>(linear.size()); }
  Mat4<S> matrix(int i) const {
    Mat4<S> m = Mat4<S>::Identity();
    m.template topLeftCorner<3, 3>() = linear[i];
    m.template topRightCorner<3, 1>() = translation[i];
    return m;
  }
};

/// Forward kinematics with explicit (possibly optimised) joint positions.
template <typename S>
BoneTransforms<S> bone_transforms(const Rig& rig, const PoseFrame& pose,
                                  std::span<const Vec3<S>> joints);

BoneTransforms<double> bone_transforms(const Rig& rig, const PoseFrame& pose);

/// Accumulates dL/dJ given dL/d(translation[i]). The linear parts do not
/// depend on J.
template <typename S>
void bone_transforms_backward(const Rig& rig, const BoneTransforms<S>& bones,
                              std::span<const Vec3<S>> joints,
                              std::span<const Vec3<S>> d_translation,
                              std::span<Vec3<S>> d_joints);

template <typename S>
Mat3<S> blend_linear(std::span<const S> w, const BoneTransforms<S>& b) {
  Mat3<S> m = Mat3<S>::Zero();
  for (int i = 0; i < b.size(); ++i)
    if (w[i] != S(0)) m += w[i] * b.linear[i];
  return m;
}

template <typename S>
Vec3<S> blend_translation(std::span<const S> w, const BoneTransforms<S>& b) {
  Vec3<S> t = Vec3<S>::Zero();
  for (int i = 0; i < b.size(); ++i)
    if (w[i] != S(0)) t += w[i] * b.translation[i];
  return t;
}

/// sum_i w_i * B_i * x, evaluated as x + sum_i w_i (B_i x - x) so that
/// identity bones return x bit for bit whatever the rounding of sum_i w_i.
template <typename S>
Vec3<S> lbs_point(const Vec3<S>& x, std::span<const S> w, const BoneTransforms<S>& b) {
  require(static_cast<int>(w.size()) == b.size(), ErrorKind::Shape,
          "weight vector length does not match bone count");
  Vec3<S> d = Vec3<S>::Zero();
  for (int i = 0; i < b.size(); ++i)
    if (w[i] != S(0)) d += w[i] * ((b.linear[i] * x - x) + b.translation[i]);
  return x + d;
}

/// (sum_i w_i * linear(B_i)) * R, not re-orthonormalised.
template <typename S>
Mat3<S> lbs_rotation(const Mat3<S>& r, std::span<const S> w, const BoneTransforms<S>& b) {
  require(static_cast<int>(w.size()) == b.size(), ErrorKind::Shape,
          "weight vector length does not match bone count");
  return blend_linear<S>(w, b) * r;
}

inline constexpr double kSingularBlendDet = 1e-9;

/// normalize((sum_i w_i linear(B_i))^-1 d). Throws SingularBlend when the
/// blended map has |det| <= 1e-9.
template <typename S>
Vec3<S> warp_view_dir(const Vec3<S>& d, std::span<const S> w, const BoneTransforms<S>& b) {
  require(static_cast<int>(w.size()) == b.size(), ErrorKind::Shape,
          "weight vector length does not match bone count");
  const Mat3<S> m = blend_linear<S>(w, b);
  if (!(std::abs(static_cast<double>(m.determinant())) > kSingularBlendDet))
    fail(ErrorKind::SingularBlend, "blended bone map is singular");
  return (m.inverse() * d).normalized();
}

/// Orthogonal polar factor U of M = U P, via SVD.
template <typename S> Mat3<S> polar_rotation(const Mat3<S>& m);

/// Reverse-mode step of `polar_rotation`: dL/dM from dL/dU.
template <typename S> Mat3<S> polar_rotation_backward(const Mat3<S>& m, const Mat3<S>& d_u);

}  // namespace gavatar
