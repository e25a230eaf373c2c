#pragma once

#include "gavatar/types.hpp"

#include <array>
#include <span>

namespace gavatar {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;
inline constexpr double kShDcOffset = 0.5;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

namespace sh_const {
inline constexpr double C0 = 0.28209479177387814;
inline constexpr double C1 = 0.4886025119029199;
inline constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792,
                                 0.31539156525252005, -1.0925484305920792,
                                 0.5462742152960396};
inline constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554,
                                 -0.4570457994644658, 0.3731763325901154,
                                 -0.4570457994644658, 1.445305721320277,
                                 -0.5900435899266435};
}  // namespace sh_const

/// Real spherical-harmonics basis of a fixed degree (0..3).
///
/// Coefficient blocks are stored channel-major: `block[ch * count + k]`
/// multiplies basis function k of colour channel ch.
struct SHBasis {
  int degree = 3;

  explicit SHBasis(int deg = 3) : degree(deg) {
    require(deg >= 0 && deg <= kMaxShDegree, ErrorKind::InvalidParameter,
            "SH degree must be in [0, 3], got " + std::to_string(deg));
  }
  int count() const { return sh_coeff_count(degree); }
  int block_size() const { return 3 * count(); }
};

/// Basis values Y_k(d) for k < (degree+1)^2. When `grad` is given it
/// receives dY_k/dd as row k (d treated as a free 3-vector, no
/// renormalisation).
template <typename S>
void sh_basis(int degree, const Vec3<S>& d, S* out,
              Eigen::Matrix<S, kMaxShCoeffs, 3>* grad = nullptr) {
  using namespace sh_const;
  const S x = d.x(), y = d.y(), z = d.z();
  out[0] = S(C0);
  if (grad) grad->setZero();
  if (degree < 1) return;
  out[1] = S(-C1) * y;
  out[2] = S(C1) * z;
  out[3] = S(-C1) * x;
  if (grad) {
    (*grad)(1, 1) = S(-C1);
    (*grad)(2, 2) = S(C1);
    (*grad)(3, 0) = S(-C1);
  }
  if (degree < 2) return;
  const S xx = x * x, yy = y * y, zz = z * z;
  out[4] = S(C2[0]) * x * y;
  out[5] = S(C2[1]) * y * z;
  out[6] = S(C2[2]) * (S(2) * zz - xx - yy);
  out[7] = S(C2[3]) * x * z;
  out[8] = S(C2[4]) * (xx - yy);
  if (grad) {
    auto& g = *grad;
    g(4, 0) = S(C2[0]) * y;
    g(4, 1) = S(C2[0]) * x;
    g(5, 1) = S(C2[1]) * z;
    g(5, 2) = S(C2[1]) * y;
    g(6, 0) = S(C2[2]) * S(-2) * x;
    g(6, 1) = S(C2[2]) * S(-2) * y;
    g(6, 2) = S(C2[2]) * S(4) * z;
    g(7, 0) = S(C2[3]) * z;
    g(7, 2) = S(C2[3]) * x;
    g(8, 0) = S(C2[4]) * S(2) * x;
    g(8, 1) = S(C2[4]) * S(-2) * y;
  }
  if (degree < 3) return;
  out[9] = S(C3[0]) * y * (S(3) * xx - yy);
  out[10] = S(C3[1]) * x * y * z;
  out[11] = S(C3[2]) * y * (S(4) * zz - xx - yy);
  out[12] = S(C3[3]) * z * (S(2) * zz - S(3) * xx - S(3) * yy);
  out[13] = S(C3[4]) * x * (S(4) * zz - xx - yy);
  out[14] = S(C3[5]) * z * (xx - yy);
  out[15] = S(C3[6]) * x * (xx - S(3) * yy);
  if (grad) {
    auto& g = *grad;
    g(9, 0) = S(C3[0]) * S(6) * x * y;
    g(9, 1) = S(C3[0]) * (S(3) * xx - S(3) * yy);
    g(10, 0) = S(C3[1]) * y * z;
    g(10, 1) = S(C3[1]) * x * z;
    g(10, 2) = S(C3[1]) * x * y;
    g(11, 0) = S(C3[2]) * S(-2) * x * y;
    g(11, 1) = S(C3[2]) * (S(4) * zz - xx - S(3) * yy);
    g(11, 2) = S(C3[2]) * S(8) * y * z;
    g(12, 0) = S(C3[3]) * S(-6) * x * z;
    g(12, 1) = S(C3[3]) * S(-6) * y * z;
    g(12, 2) = S(C3[3]) * (S(6) * zz - S(3) * xx - S(3) * yy);
    g(13, 0) = S(C3[4]) * (S(4) * zz - S(3) * xx - yy);
    g(13, 1) = S(C3[4]) * S(-2) * x * y;
    g(13, 2) = S(C3[4]) * S(8) * x * z;
    g(14, 0) = S(C3[5]) * S(2) * x * z;
    g(14, 1) = S(C3[5]) * S(-2) * y * z;
    g(14, 2) = S(C3[5]) * (xx - yy);
    g(15, 0) = S(C3[6]) * (S(3) * xx - S(3) * yy);
    g(15, 1) = S(C3[6]) * S(-6) * x * y;
  }
}

/// Unclamped colour: sum_k block[ch,k] * Y_k(d) + 0.5 per channel.
template <typename S>
Vec3<S> sh_color_raw(std::span<const S> block, const Vec3<S>& d, int degree) {
  const int n = sh_coeff_count(degree);
  std::array<S, kMaxShCoeffs> y{};
  sh_basis<S>(degree, d, y.data());
  Vec3<S> c;
  for (int ch = 0; ch < 3; ++ch) {
    S acc = S(kShDcOffset);
    for (int k = 0; k < n; ++k) acc += block[ch * n + k] * y[k];
    c[ch] = acc;
  }
  return c;
}

/// View-dependent colour max(Y(SH, d) + 0.5, 0) for a unit direction d.
template <typename S>
Vec3<S> eval_sh(std::span<const S> block, const Vec3<S>& d, const SHBasis& basis) {
  require(static_cast<int>(block.size()) == basis.block_size(), ErrorKind::Shape,
          "SH block has " + std::to_string(block.size()) + " entries, degree " +
              std::to_string(basis.degree) + " needs " +
              std::to_string(basis.block_size()));
  require(std::abs(static_cast<double>(d.norm()) - 1.0) <= 1e-6,
          ErrorKind::InvalidParameter, "SH direction must be unit length");
  return sh_color_raw<S>(block, d, basis.degree).cwiseMax(S(0));
}

}  // namespace gavatar
