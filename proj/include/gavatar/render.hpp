#pragma once

#include "gavatar/camera.hpp"
#include "gavatar/image.hpp"
#include "gavatar/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gavatar {

inline constexpr double kLowPassFloor = 0.3;  // px^2 added to the 2D covariance diagonal

/// Screen-space Gaussian.
template <typename S> struct Splat2D {
  Vec2<S> mean;
  Mat2<S> cov;     // includes the low-pass floor
  Vec3<S> conic;   // (a, b, c) of cov^-1 = [[a, b], [b, c]]
  S depth = S(0);
  Vec3<S> color = Vec3<S>::Zero();
  S alpha0 = S(0);
  S extent_x = S(0), extent_y = S(0);  // half-widths of the cut-off ellipse's box
  int source = -1;                     // caller's primitive index
};

/// Intermediates of one projection, kept for the backward pass.
template <typename S> struct ProjectionCache {
  Vec3<S> camera_point;
  Eigen::Matrix<S, 2, 3> jacobian;
  Mat3<S> cov_camera;
};

struct RenderTarget {
  int width = 1;
  int height = 1;
  Vec3d background = Vec3d::Zero();
  int tile_size = 16;
};

struct RasterSettings {
  double low_pass = kLowPassFloor;
  // Per-pixel transmittance below which compositing stops (tiled only).
  double termination = 1e-6;
  // Splats contribute only inside this many standard deviations.
  double extent_sigma = 3.0;
};

/// EWA projection of a posed Gaussian (centre x, world covariance sigma).
/// Returns nullopt when the centre is not in front of the near plane or
/// the cut-off ellipse misses every pixel centre.
template <typename S>
std::optional<Splat2D<S>> project_gaussian(const Vec3<S>& x, const Mat3<S>& sigma,
                                           const Camera& cam, const RasterSettings& settings,
                                           ProjectionCache<S>* cache = nullptr);

/// Reverse of project_gaussian: from d(mean), d(conic) to d(x), d(sigma).
template <typename S>
void project_gaussian_backward(const Splat2D<S>& splat, const ProjectionCache<S>& cache,
                               const Camera& cam, const Vec2<S>& d_mean, const Vec3<S>& d_conic,
                               Vec3<S>& d_x, Mat3<S>& d_sigma);

template <typename S> struct RasterCache {
  std::vector<int> order;                // splat indices, front to back
  std::vector<std::vector<int>> tiles;   // per tile, indices in front-to-back order
  int tiles_x = 0, tiles_y = 0;
  std::vector<unsigned char> rejected;   // per splat
};

template <typename S> struct RasterOutput {
  Image<S> image;
  std::vector<S> transmittance;  // per pixel, after the last composited splat
  long rejected = 0;             // non-finite splats skipped
};

/// Tiled front-to-back alpha compositing, parallel over tiles.
template <typename S>
RasterOutput<S> rasterize(std::span<const Splat2D<S>> splats, const RenderTarget& target,
                          const RasterSettings& settings, RasterCache<S>* cache = nullptr);

/// Brute-force oracle: per pixel, gather every splat, sort by (depth,
/// index), composite with no tiling and no early termination. Serial.
template <typename S>
RasterOutput<S> rasterize_reference(std::span<const Splat2D<S>> splats,
                                    const RenderTarget& target, const RasterSettings& settings);

/// Per-splat gradient of the loss.
template <typename S> struct SplatGrad {
  Vec2<S> mean = Vec2<S>::Zero();
  Vec3<S> conic = Vec3<S>::Zero();  // w.r.t. (a, b, c); b counted once
  Vec3<S> color = Vec3<S>::Zero();
  S alpha0 = S(0);
};

template <typename S>
std::vector<SplatGrad<S>> rasterize_backward(std::span<const Splat2D<S>> splats,
                                             const RenderTarget& target,
                                             const RasterSettings& settings,
                                             const RasterCache<S>& cache,
                                             const Image<S>& d_image);

/// Stable front-to-back order: depth ascending, ties by input index.
template <typename S> std::vector<int> depth_order(std::span<const Splat2D<S>> splats);

}  // namespace gavatar
