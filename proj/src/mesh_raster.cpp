#include "gavatar/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gavatar {
namespace {

struct ZBuffer {
  std::vector<double> depth;
  std::vector<Vec3d> normal;
};

void rasterize_view(const CanonicalMesh& mesh, const OrthoFrame& frame,
                    const std::vector<bool>& degenerate, PriorMap& depth_map,
                    PriorMap* normal_map) {
  const int w = frame.width, h = frame.height;
  ZBuffer zb;
  zb.depth.assign(static_cast<size_t>(w) * h, std::numeric_limits<double>::infinity());
  zb.normal.assign(static_cast<size_t>(w) * h, Vec3d::Zero());

  for (size_t t = 0; t < mesh.faces.size(); ++t) {
    if (degenerate[t]) continue;
    const auto& f = mesh.faces[t];
    const Vec3d& a = mesh.vertices[f[0]];
    const Vec3d& b = mesh.vertices[f[1]];
    const Vec3d& c = mesh.vertices[f[2]];
    const Vec3d n = (b - a).cross(c - a).normalized();
    const Vec3d pa = frame.project(a), pb = frame.project(b), pc = frame.project(c);
    const double area = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x());
    if (std::abs(area) < 1e-12) continue;  // edge-on in this view

    const double umin = std::min({pa.x(), pb.x(), pc.x()});
    const double umax = std::max({pa.x(), pb.x(), pc.x()});
    const double vmin = std::min({pa.y(), pb.y(), pc.y()});
    const double vmax = std::max({pa.y(), pb.y(), pc.y()});
    const int i0 = std::max(0, static_cast<int>(std::floor(umin - 0.5)));
    const int i1 = std::min(w - 1, static_cast<int>(std::ceil(umax - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor(vmin - 0.5)));
    const int j1 = std::min(h - 1, static_cast<int>(std::ceil(vmax - 0.5)));
    constexpr double eps = 1e-9;
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const double u = i + 0.5, v = j + 0.5;
        const double w0 = ((pb.x() - u) * (pc.y() - v) - (pb.y() - v) * (pc.x() - u)) / area;
        const double w1 = ((pc.x() - u) * (pa.y() - v) - (pc.y() - v) * (pa.x() - u)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < -eps || w1 < -eps || w2 < -eps) continue;
        const double z = w0 * pa.z() + w1 * pb.z() + w2 * pc.z();
        const size_t px = static_cast<size_t>(j) * w + i;
        if (z < zb.depth[px]) {
          zb.depth[px] = z;
          zb.normal[px] = n;
        }
      }
    }
  }

  for (size_t px = 0; px < zb.depth.size(); ++px) {
    if (!std::isfinite(zb.depth[px])) continue;
    depth_map.mask[px] = 1;
    depth_map.data[px] = static_cast<float>(zb.depth[px]);
    if (normal_map) {
      normal_map->mask[px] = 1;
      for (int c = 0; c < 3; ++c) normal_map->data[px * 3 + c] = static_cast<float>(zb.normal[px][c]);
    }
  }
}

}  // namespace

PriorPack render_priors(const CanonicalMesh& mesh, const std::array<OrthoFrame, 4>& frames,
                        PriorRenderStats* stats) {
  mesh.validate();
  std::vector<bool> degenerate(mesh.faces.size(), false);
  long degenerate_count = 0;
  for (size_t t = 0; t < mesh.faces.size(); ++t) {
    const auto& f = mesh.faces[t];
    const Vec3d cr = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                         .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    if (!(cr.norm() > 1e-15)) {
      degenerate[t] = true;
      ++degenerate_count;
    }
  }
  if (stats) stats->degenerate_triangles = degenerate_count;

  PriorPack pack;
  for (int v = 0; v < 4; ++v) pack.depth[v].allocate(frames[v], 1);
  pack.normal[0].allocate(frames[kFront], 3);
  pack.normal[1].allocate(frames[kBack], 3);
  for (int v = 0; v < 4; ++v) {
    PriorMap* normals = v == kFront ? &pack.normal[0] : (v == kBack ? &pack.normal[1] : nullptr);
    rasterize_view(mesh, frames[v], degenerate, pack.depth[v], normals);
  }
  return pack;
}

PriorPack render_priors(const CanonicalMesh& mesh, int resolution, PriorRenderStats* stats) {
  return render_priors(mesh, fit_prior_frames(mesh.bounds(), resolution), stats);
}

}  // namespace gavatar
