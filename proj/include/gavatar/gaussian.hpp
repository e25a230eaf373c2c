#pragma once

#include "gavatar/sh.hpp"
#include "gavatar/types.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace gavatar {

/// Lower bound on per-axis scale, in metres. The optimiser maps raw scale
/// parameters to `kScaleFloor + exp(raw)` so the covariance stays invertible.
inline constexpr double kScaleFloor = 1e-7;

template <typename S> S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

template <typename S> S logit(S p) { return std::log(p / (S(1) - p)); }

// Quaternions are (w, x, y, z).
template <typename S> Mat3<S> quat_to_matrix(const Vec4<S>& q) {
  const S w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3<S> r;
  r << S(1) - S(2) * (y * y + z * z), S(2) * (x * y - w * z), S(2) * (x * z + w * y),
      S(2) * (x * y + w * z), S(1) - S(2) * (x * x + z * z), S(2) * (y * z - w * x),
      S(2) * (x * z - w * y), S(2) * (y * z + w * x), S(1) - S(2) * (x * x + y * y);
  return r;
}

/// Rotation from a raw (not necessarily unit) quaternion.
template <typename S> Mat3<S> rotation_from_raw_quat(const Vec4<S>& raw) {
  return quat_to_matrix<S>(raw / raw.norm());
}

/// Reverse-mode step of `rotation_from_raw_quat`: given dL/dR returns dL/dq_raw.
template <typename S>
Vec4<S> rotation_from_raw_quat_backward(const Vec4<S>& raw, const Mat3<S>& dR) {
  const S n = raw.norm();
  const Vec4<S> q = raw / n;
  const S w = q[0], x = q[1], y = q[2], z = q[3];
  const S two = S(2), four = S(4);
  Vec4<S> g;
  g[0] = two * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) -
                y * dR(2, 0) + x * dR(2, 1));
  g[1] = two * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - w * dR(1, 2) +
                z * dR(2, 0) + w * dR(2, 1)) -
         four * x * (dR(1, 1) + dR(2, 2));
  g[2] = two * (x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) + z * dR(1, 2) -
                w * dR(2, 0) + z * dR(2, 1)) -
         four * y * (dR(0, 0) + dR(2, 2));
  g[3] = two * (-w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) + y * dR(1, 2) +
                x * dR(2, 0) + y * dR(2, 1)) -
         four * z * (dR(0, 0) + dR(1, 1));
  return (g - q * q.dot(g)) / n;
}

template <typename S> Vec4<S> matrix_to_quat(const Mat3<S>& r) {
  Eigen::Quaternion<S> q(r);
  q.normalize();
  return Vec4<S>(q.w(), q.x(), q.y(), q.z());
}

/// Symmetric 3x3 covariance, PSD by construction.
class Covariance3 {
 public:
  explicit Covariance3(const Mat3d& sigma);
  const Mat3d& sigma() const { return sigma_; }

 private:
  Mat3d sigma_;
};

/// R diag(S)^2 R^T. Throws InvalidParameter for non-positive scales.
Covariance3 build_covariance(const Mat3d& rotation, const Vec3d& scales);

/// Covariance L diag(s)^2 L^T for an arbitrary linear map L (used after
/// skinning, where L is the blended map times the canonical rotation).
template <typename S> Mat3<S> covariance_from_map(const Mat3<S>& l, const Vec3<S>& s) {
  const Mat3<S> m = l * s.asDiagonal();
  return m * m.transpose();
}

/// Canonical Gaussian primitive: centre, orientation, scales, base opacity
/// and SH colour block. Validated on construction, immutable afterwards.
class GaussianPrimitive {
 public:
  GaussianPrimitive(const Vec3d& center, const Mat3d& rotation, const Vec3d& scales,
                    double opacity, std::vector<double> sh, int sh_degree = 3);

  const Vec3d& center() const { return center_; }
  const Mat3d& rotation() const { return rotation_; }
  const Vec3d& scales() const { return scales_; }
  double opacity() const { return opacity_; }
  std::span<const double> sh() const { return sh_; }
  const SHBasis& basis() const { return basis_; }
  Covariance3 covariance() const { return build_covariance(rotation_, scales_); }

 private:
  Vec3d center_;
  Mat3d rotation_;
  Vec3d scales_;
  double opacity_;
  std::vector<double> sh_;
  SHBasis basis_;
};

/// Primitive plus skinning weights, displacement and ambient occlusion.
/// Weights are normalised to sum to one on construction.
class SkinnedGaussian {
 public:
  SkinnedGaussian(GaussianPrimitive base, std::vector<double> weights,
                  const Vec3d& displacement = Vec3d::Zero(), double ao = 1.0);

  const GaussianPrimitive& base() const { return base_; }
  std::span<const double> weights() const { return weights_; }
  const Vec3d& displacement() const { return displacement_; }
  double ao() const { return ao_; }

 private:
  GaussianPrimitive base_;
  std::vector<double> weights_;
  Vec3d displacement_;
  double ao_;
};

/// alpha0 * exp(-1/2 (x - x0)^T Sigma^-1 (x - x0)).
/// Throws DegenerateCovariance when a scale is below the floor.
double eval_opacity(const Vec3d& x, const GaussianPrimitive& g);

/// Component-wise ao * c.
template <typename S> Vec3<S> modulate_ao(S ao, const Vec3<S>& c) { return ao * c; }

}  // namespace gavatar
