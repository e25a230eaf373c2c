#pragma once

#include "gavatar/hash_grid.hpp"
#include "gavatar/mesh.hpp"
#include "gavatar/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace gavatar {

/// Orthographic image plane. `origin` is the top-left corner of the image
/// on the plane; texel (i, j) covers continuous coordinates [i, i+1) x
/// [j, j+1) with its centre at (i + 0.5, j + 0.5). Depth is measured along
/// `forward` from the plane.
struct OrthoFrame {
  Vec3d origin = Vec3d::Zero();
  Vec3d right = Vec3d::UnitX();
  Vec3d up = Vec3d::UnitY();
  Vec3d forward = -Vec3d::UnitZ();
  double pixel_size = 1.0;
  int width = 1;
  int height = 1;

  /// (u, v, depth) in texel units / metres.
  Vec3d project(const Vec3d& x) const {
    const Vec3d r = x - origin;
    return {r.dot(right) / pixel_size, -r.dot(up) / pixel_size, r.dot(forward)};
  }
  Vec3d unproject(double u, double v, double depth) const {
    return origin + u * pixel_size * right - v * pixel_size * up + depth * forward;
  }
};

/// Single- or multi-channel map with a coverage mask of the same size.
struct PriorMap {
  OrthoFrame frame;
  int channels = 1;
  std::vector<float> data;  // row-major, channel-minor
  std::vector<std::uint8_t> mask;

  int width() const { return frame.width; }
  int height() const { return frame.height; }
  float at(int i, int j, int c) const {
    return data[(static_cast<size_t>(j) * frame.width + i) * channels + c];
  }
  bool valid(int i, int j) const {
    return i >= 0 && j >= 0 && i < frame.width && j < frame.height &&
           mask[static_cast<size_t>(j) * frame.width + i] != 0;
  }
  void allocate(const OrthoFrame& f, int ch);
  void validate() const;
};

/// Depth maps in front/back/left/right order and normal maps front/back.
struct PriorPack {
  std::array<PriorMap, 4> depth;
  std::array<PriorMap, 2> normal;

  void validate() const;
};

enum DepthView { kFront = 0, kBack = 1, kLeft = 2, kRight = 3 };

/// The four axis-aligned frames around a box (front looks down -z, back
/// down +z, left down -x, right down +x; all with +y up), padded by
/// `margin` of the extent, each `resolution` texels on its longer side.
std::array<OrthoFrame, 4> fit_prior_frames(const BoundingBox& box, int resolution,
                                           double margin = 0.05);

/// Samples `map` at the projection of `x`. The point counts as inside when
/// the texel containing it is covered; the value is then the bilinear
/// blend of the covered taps among the four neighbours, renormalised by
/// their weight. Outside, the output is zero. With `grad` non-null it
/// receives d(out)/dx as a channels x 3 row-major block.
template <typename S>
void sample_prior_map(const PriorMap& map, const Vec3<S>& x, S* out, S* grad = nullptr);

/// [d_f, d_b, d_l, d_r] at x0.
template <typename S> Vec4<S> sample_depth_prior(const PriorPack& pack, const Vec3<S>& x0);

/// [n_f, n_b] at x0, stored raw (not renormalised).
template <typename S>
Eigen::Matrix<S, 6, 1> sample_normal_prior(const PriorPack& pack, const Vec3<S>& x0);

/// (sin(2^k pi t), cos(2^k pi t)) for k < L; t is already normalised to [0, 1].
template <typename S> void temporal_encoding(double t_norm, int frequencies, S* out);
std::vector<double> temporal_encoding(double t_norm, int frequencies);

/// t normalised to [0, 1] over [t_min, t_max] (0 for a degenerate range).
double normalize_time(double t, double t_min, double t_max);

struct PriorRenderStats {
  long degenerate_triangles = 0;
};

/// z-buffered orthographic rasterisation of the mesh into the four depth
/// maps and two face-normal maps; coverage becomes the mask.
PriorPack render_priors(const CanonicalMesh& mesh, int resolution = 512,
                        PriorRenderStats* stats = nullptr);
PriorPack render_priors(const CanonicalMesh& mesh, const std::array<OrthoFrame, 4>& frames,
                        PriorRenderStats* stats = nullptr);

}  // namespace gavatar
