#pragma once

#include "gavatar/field.hpp"
#include "gavatar/mesh.hpp"
#include "gavatar/project.hpp"
#include "gavatar/region_init.hpp"
#include "gavatar/render.hpp"
#include "gavatar/pipeline.hpp"
#include "gavatar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace gavatar::test {

/// rows x cols vertex grid in the z = 0 plane, `spacing` metres apart, two
/// triangles per cell, single joint, all torso.
inline CanonicalMesh grid_mesh(int rows, int cols, double spacing = 0.01) {
  CanonicalMesh m;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.vertices.push_back(Vec3d(c * spacing, r * spacing, 0.0));
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c, b = a + 1, d = a + cols, e = d + 1;
      m.faces.push_back({a, b, e});
      m.faces.push_back({a, e, d});
    }
  m.skin_weights = MatX<double>::Ones(rows * cols, 1);
  m.labels.assign(rows * cols, Region::Torso);
  return m;
}

/// Vertices joined only by the listed edges (degenerate triangles).
inline CanonicalMesh graph_mesh(const std::vector<Vec3d>& v, const std::vector<std::array<int, 2>>& e) {
  CanonicalMesh m;
  m.vertices = v;
  for (const auto& [a, b] : e) m.faces.push_back({a, b, b});
  m.skin_weights = MatX<double>::Ones(static_cast<int>(v.size()), 1);
  m.labels.assign(v.size(), Region::Torso);
  return m;
}

/// Small capsule scene for model-level tests.
inline SynthConfig small_synth(int image_size = 32) {
  SynthConfig c;
  c.image_size = image_size;
  c.poses = 3;
  c.train_cameras = 2;
  c.gt_primitives = 400;
  c.prior_resolution = 64;
  return c;
}

/// Model built on the small capsule with a randomised field, so that every
/// block of the decoder input actually reaches the outputs.
inline AvatarModel<double> small_model(const SyntheticScene& scene, std::uint64_t seed = 3,
                                       bool randomize = true) {
  ModelSpec spec;
  spec.profile.base_count = 1;
  spec.profile.max_count = 2;
  spec.profile.seed = seed;
  spec.field = bundled_field_config();
  spec.prior_resolution = 64;
  spec.seed = seed;
  auto m = build_model(scene.mesh, scene.rig, spec);
  if (randomize) {
    Rng rng(stream_seed(seed, 99));
    for (auto* p : {&m.field.low.params(), &m.field.high.params(), &m.field.decoder.params(),
                    &m.field.ao_decoder.params()})
      for (Eigen::Index i = 0; i < p->size(); ++i) (*p)[i] = rng.uniform(-0.5, 0.5);
  }
  return m;
}

/// Random screen-space splats from projected random 3D Gaussians.
inline std::vector<Splat2D<double>> random_splats(Rng& rng, int n, int w, int h) {
  const Camera cam = Camera::look_at(Vec3d(0, 0, 3), Vec3d::Zero(), Vec3d::UnitY(), 40, w, h);
  std::vector<Splat2D<double>> out;
  const RasterSettings rs;
  while (static_cast<int>(out.size()) < n) {
    Mat3d a;
    for (int k = 0; k < 9; ++k) a.data()[k] = rng.normal() * 0.04;
    const Vec3d x(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
    auto sp = project_gaussian<double>(x, a * a.transpose() + 1e-6 * Mat3d::Identity(), cam, rs);
    if (!sp) continue;
    sp->color = Vec3d(rng.uniform(), rng.uniform(), rng.uniform());
    sp->alpha0 = rng.uniform(0.05, 0.99);
    out.push_back(*sp);
  }
  return out;
}

struct SeamJumps {
  double blended = 0.0;
  double hard = 0.0;
  int band_samples = 0;
};

/// Bundled seam field: a 1 mm strip whose left end is Hand, a low band filled
/// with uniform [-1, 1] and a high band near 1, so the two bands disagree
/// everywhere. Returns the largest per-feature change between neighbouring
/// samples inside the transition band, for the soft blend and for tau
/// thresholded at 0.5.
inline SeamJumps seam_jumps() {
  const double spacing = 0.001;
  const int cols = 301;
  auto mesh = grid_mesh(2, cols, spacing);
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v)
    if (mesh.vertices[v].x() < 0.05) mesh.labels[v] = Region::Hand;
  const auto geo = compute_geodesic_field(mesh, RegionProfile{});
  const BoundingBox b = mesh.bounds();
  const Vec3d pad = Vec3d::Constant(0.02);
  MultiScaleHashField<double> f(bundled_field_config(), BoundingBox{b.lo - pad, b.hi + pad}, 1);
  Rng rng(4242);
  for (Eigen::Index i = 0; i < f.low.params().size(); ++i) f.low.params()[i] = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < f.high.params().size(); ++i) f.high.params()[i] = 1 + rng.uniform(-0.05, 0.05);
  const int width = f.layout().depth;
  SeamJumps out;
  std::vector<double> pb(width), ph(width), cb(width), ch(width);
  bool have_prev = false;
  for (int c = 0; c < cols; ++c) {
    const double tau = geo.tau[c];
    f.blended_query(mesh.vertices[c], tau, true, cb);
    f.blended_query(mesh.vertices[c], tau >= 0.5 ? 1.0 : 0.0, true, ch);
    const bool in_band = tau > 0.0 && tau < 1.0;
    if (have_prev && in_band) {
      ++out.band_samples;
      for (int k = 0; k < width; ++k) {
        out.blended = std::max(out.blended, std::abs(cb[k] - pb[k]));
        out.hard = std::max(out.hard, std::abs(ch[k] - ph[k]));
      }
    }
    pb.swap(cb);
    ph.swap(ch);
    have_prev = true;
  }
  return out;
}

}  // namespace gavatar::test
