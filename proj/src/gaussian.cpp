#include "gavatar/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>

namespace gavatar {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::DegenerateCovariance: return "degenerate-covariance";
    case ErrorKind::SingularBlend: return "singular-blend";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::NonFinite: return "non-finite";
  }
  return "unknown";
}

Covariance3::Covariance3(const Mat3d& sigma) : sigma_(sigma) {
  require(sigma.allFinite(), ErrorKind::InvalidParameter, "covariance is not finite");
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidParameter, "covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3d> es(sigma, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-10, ErrorKind::InvalidParameter,
          "covariance is not positive semidefinite");
}

Covariance3 build_covariance(const Mat3d& rotation, const Vec3d& scales) {
  require((scales.array() > 0.0).all(), ErrorKind::InvalidParameter,
          "scales must be strictly positive");
  Mat3d sigma = covariance_from_map<double>(rotation, scales);
  // Exact symmetry regardless of rounding in the product.
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return Covariance3(sigma);
}

GaussianPrimitive::GaussianPrimitive(const Vec3d& center, const Mat3d& rotation,
                                     const Vec3d& scales, double opacity,
                                     std::vector<double> sh, int sh_degree)
    : center_(center),
      rotation_(rotation),
      scales_(scales),
      opacity_(opacity),
      sh_(std::move(sh)),
      basis_(sh_degree) {
  require(center.allFinite(), ErrorKind::InvalidParameter, "centre is not finite");
  require((scales.array() > 0.0).all() && scales.allFinite(),
          ErrorKind::InvalidParameter, "scales must be strictly positive");
  require(opacity >= 0.0 && opacity <= 1.0, ErrorKind::InvalidParameter,
          "opacity must lie in [0, 1]");
  const double ortho = (rotation * rotation.transpose() - Mat3d::Identity()).cwiseAbs().maxCoeff();
  require(ortho <= 1e-9 && rotation.determinant() > 0.0, ErrorKind::InvalidParameter,
          "rotation must be orthonormal with det +1");
  require(static_cast<int>(sh_.size()) == basis_.block_size(), ErrorKind::Shape,
          "SH block length does not match degree");
}

SkinnedGaussian::SkinnedGaussian(GaussianPrimitive base, std::vector<double> weights,
                                 const Vec3d& displacement, double ao)
    : base_(std::move(base)), weights_(std::move(weights)), displacement_(displacement), ao_(ao) {
  require(!weights_.empty(), ErrorKind::Shape, "empty skinning weight vector");
  double sum = 0.0;
  for (double w : weights_) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::InvalidParameter,
            "skinning weights must be finite and non-negative");
    sum += w;
  }
  require(sum > 0.0, ErrorKind::InvalidParameter, "skinning weights sum to zero");
  for (double& w : weights_) w /= sum;
  require(ao >= 0.0 && ao <= 1.0, ErrorKind::InvalidParameter, "ao must lie in [0, 1]");
  require(displacement.allFinite(), ErrorKind::InvalidParameter, "displacement not finite");
}

double eval_opacity(const Vec3d& x, const GaussianPrimitive& g) {
  if ((g.scales().array() < kScaleFloor).any()) {
    fail(ErrorKind::DegenerateCovariance, "covariance is singular (scale below floor)");
  }
  // Sigma^-1 = R diag(1/s^2) R^T, so the Mahalanobis term is |diag(1/s) R^T d|^2.
  const Vec3d local = (g.rotation().transpose() * (x - g.center())).cwiseQuotient(g.scales());
  return g.opacity() * std::exp(-0.5 * local.squaredNorm());
}

}  // namespace gavatar
