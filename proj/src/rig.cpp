#include "gavatar/rig.hpp"

#include <Eigen/SVD>

namespace gavatar {

Rig::Rig(std::vector<int> parents, std::vector<Vec3d> rest_positions,
         std::vector<std::string> names)
    : parents_(std::move(parents)), rest_(std::move(rest_positions)), names_(std::move(names)) {
  const int n = static_cast<int>(parents_.size());
  require(n >= 1, ErrorKind::Validation, "rig needs at least one joint");
  require(static_cast<int>(rest_.size()) == n, ErrorKind::Shape,
          "rest position count does not match joint count");
  if (names_.empty()) {
    for (int i = 0; i < n; ++i) names_.push_back("joint_" + std::to_string(i));
  }
  require(static_cast<int>(names_.size()) == n, ErrorKind::Shape,
          "joint name count does not match joint count");

  int roots = 0;
  std::vector<std::vector<int>> children(n);
  for (int i = 0; i < n; ++i) {
    const int p = parents_[i];
    if (p < 0) {
      ++roots;
      continue;
    }
    require(p < n && p != i, ErrorKind::Validation, "parent index out of range");
    children[p].push_back(i);
  }
  require(roots == 1, ErrorKind::Validation, "rig must have exactly one root");
  for (int i = 0; i < n; ++i)
    if (parents_[i] < 0) order_.push_back(i);
  for (size_t k = 0; k < order_.size(); ++k)
    for (int c : children[order_[k]]) order_.push_back(c);
  require(static_cast<int>(order_.size()) == n, ErrorKind::Validation,
          "rig parent links contain a cycle");
  for (const auto& p : rest_)
    require(p.allFinite(), ErrorKind::Validation, "rest position not finite");
}

Mat3d euler_xyz_to_matrix(const Vec3d& e) {
  return (Eigen::AngleAxisd(e.x(), Vec3d::UnitX()) * Eigen::AngleAxisd(e.y(), Vec3d::UnitY()) *
          Eigen::AngleAxisd(e.z(), Vec3d::UnitZ()))
      .toRotationMatrix();
}

template <typename S>
BoneTransforms<S> bone_transforms(const Rig& rig, const PoseFrame& pose,
                                  std::span<const Vec3<S>> joints) {
  const int n = rig.joint_count();
  require(static_cast<int>(pose.euler.size()) == n, ErrorKind::Shape,
          "pose has " + std::to_string(pose.euler.size()) + " joint rotations, rig has " +
              std::to_string(n));
  require(static_cast<int>(joints.size()) == n, ErrorKind::Shape,
          "joint position count does not match rig");
  require(std::isfinite(pose.t), ErrorKind::Validation, "pose time not finite");

  BoneTransforms<S> b;
  b.linear.resize(n);
  b.translation.resize(n);
  b.joint_world.resize(n);
  // Joint displacements world - rest, accumulated as (L v - v) terms so that
  // the rest pose gives exact zeros.
  std::vector<Vec3<S>> moved(n);
  const Vec3<S> global = pose.translation.cast<S>();
  for (int i : rig.order()) {
    const Mat3<S> local = euler_xyz_to_matrix(pose.euler[i]).cast<S>();
    const int p = rig.parents()[i];
    if (p < 0) {
      b.linear[i] = local;
      moved[i] = Vec3<S>::Zero();
    } else {
      b.linear[i] = b.linear[p] * local;
      const Vec3<S> bone = joints[i] - joints[p];
      moved[i] = moved[p] + (b.linear[p] * bone - bone);
    }
    b.translation[i] = global + moved[i] - (b.linear[i] * joints[i] - joints[i]);
    b.joint_world[i] = joints[i] + moved[i] + global;
  }
  return b;
}

BoneTransforms<double> bone_transforms(const Rig& rig, const PoseFrame& pose) {
  return bone_transforms<double>(rig, pose, rig.rest_positions());
}

template <typename S>
void bone_transforms_backward(const Rig& rig, const BoneTransforms<S>& bones,
                              std::span<const Vec3<S>> joints,
                              std::span<const Vec3<S>> d_translation,
                              std::span<Vec3<S>> d_joints) {
  (void)joints;
  const int n = rig.joint_count();
  std::vector<Vec3<S>> d_world(n);
  for (int i = 0; i < n; ++i) {
    d_world[i] = d_translation[i];
    d_joints[i] -= bones.linear[i].transpose() * d_translation[i];
  }
  const auto order = rig.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int i = *it;
    const int p = rig.parents()[i];
    if (p < 0) {
      d_joints[i] += d_world[i];
      continue;
    }
    const Vec3<S> g = bones.linear[p].transpose() * d_world[i];
    d_world[p] += d_world[i];
    d_joints[i] += g;
    d_joints[p] -= g;
  }
}

template <typename S> Mat3<S> polar_rotation(const Mat3<S>& m) {
  Eigen::JacobiSVD<Mat3<S>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

template <typename S> Mat3<S> polar_rotation_backward(const Mat3<S>& m, const Mat3<S>& d_u) {
  Eigen::JacobiSVD<Mat3<S>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3<S> u = svd.matrixU() * svd.matrixV().transpose();
  const Mat3<S>& y = svd.matrixV();
  const Vec3<S> sv = svd.singularValues();
  const Mat3<S> g = y.transpose() * (u.transpose() * d_u) * y;
  Mat3<S> h;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) h(i, j) = g(i, j) / (sv[i] + sv[j]);
  h = (y * h * y.transpose()).eval();
  return u * (h - h.transpose());
}

#define GAVATAR_INSTANTIATE_RIG(S)                                                        \
  template BoneTransforms<S> bone_transforms<S>(const Rig&, const PoseFrame&,            \
                                                std::span<const Vec3<S>>);               \
  template void bone_transforms_backward<S>(const Rig&, const BoneTransforms<S>&,        \
                                            std::span<const Vec3<S>>,                    \
                                            std::span<const Vec3<S>>, std::span<Vec3<S>>); \
  template Mat3<S> polar_rotation<S>(const Mat3<S>&);                                    \
  template Mat3<S> polar_rotation_backward<S>(const Mat3<S>&, const Mat3<S>&);

GAVATAR_INSTANTIATE_RIG(float)
GAVATAR_INSTANTIATE_RIG(double)

}  // namespace gavatar
