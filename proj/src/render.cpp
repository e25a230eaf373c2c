#include "gavatar/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gavatar {

template <typename S>
std::optional<Splat2D<S>> project_gaussian(const Vec3<S>& x, const Mat3<S>& sigma,
                                           const Camera& cam, const RasterSettings& settings,
                                           ProjectionCache<S>* cache) {
  const Mat3<S> r = cam.rotation().template cast<S>();
  const Vec3<S> p = r * x + cam.translation().template cast<S>();
  const bool persp = cam.model == ProjectionModel::Perspective;
  if (persp && !(p.z() > S(cam.near_plane))) return std::nullopt;
  if (!p.allFinite() || !sigma.allFinite()) return std::nullopt;

  const S fx = S(cam.fx), fy = S(cam.fy);
  Eigen::Matrix<S, 2, 3> jac = Eigen::Matrix<S, 2, 3>::Zero();
  Splat2D<S> s;
  if (persp) {
    const S iz = S(1) / p.z();
    s.mean = Vec2<S>(fx * p.x() * iz + S(cam.cx), fy * p.y() * iz + S(cam.cy));
    jac(0, 0) = fx * iz;
    jac(0, 2) = -fx * p.x() * iz * iz;
    jac(1, 1) = fy * iz;
    jac(1, 2) = -fy * p.y() * iz * iz;
  } else {
    s.mean = Vec2<S>(fx * p.x() + S(cam.cx), fy * p.y() + S(cam.cy));
    jac(0, 0) = fx;
    jac(1, 1) = fy;
  }
  const Mat3<S> cov_cam = r * sigma * r.transpose();
  Mat2<S> cov = jac * cov_cam * jac.transpose();
  cov(0, 1) = cov(1, 0) = S(0.5) * (cov(0, 1) + cov(1, 0));
  cov(0, 0) += S(settings.low_pass);
  cov(1, 1) += S(settings.low_pass);
  const S det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  if (!(det > S(0))) return std::nullopt;

  s.cov = cov;
  s.conic = Vec3<S>(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
  s.depth = p.z();
  const S k = S(settings.extent_sigma);
  s.extent_x = k * std::sqrt(cov(0, 0));
  s.extent_y = k * std::sqrt(cov(1, 1));
  if (s.mean.x() + s.extent_x < S(0.5) || s.mean.x() - s.extent_x > S(cam.width - 0.5) ||
      s.mean.y() + s.extent_y < S(0.5) || s.mean.y() - s.extent_y > S(cam.height - 0.5))
    return std::nullopt;
  if (cache) {
    cache->camera_point = p;
    cache->jacobian = jac;
    cache->cov_camera = cov_cam;
  }
  return s;
}

template <typename S>
void project_gaussian_backward(const Splat2D<S>& splat, const ProjectionCache<S>& cache,
                               const Camera& cam, const Vec2<S>& d_mean, const Vec3<S>& d_conic,
                               Vec3<S>& d_x, Mat3<S>& d_sigma) {
  const Mat3<S> r = cam.rotation().template cast<S>();
  const auto& jac = cache.jacobian;
  Mat2<S> q;
  q << splat.conic[0], splat.conic[1], splat.conic[1], splat.conic[2];
  Mat2<S> dq;
  dq << d_conic[0], S(0.5) * d_conic[1], S(0.5) * d_conic[1], d_conic[2];
  const Mat2<S> d_cov = -q * dq * q;

  const Eigen::Matrix<S, 2, 3> d_jac = S(2) * d_cov * jac * cache.cov_camera;
  const Mat3<S> d_cov_cam = jac.transpose() * d_cov * jac;
  d_sigma = r.transpose() * d_cov_cam * r;

  Vec3<S> dp = jac.transpose() * d_mean;
  if (cam.model == ProjectionModel::Perspective) {
    const Vec3<S>& p = cache.camera_point;
    const S fx = S(cam.fx), fy = S(cam.fy);
    const S iz = S(1) / p.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    dp.x() += d_jac(0, 2) * (-fx * iz2);
    dp.y() += d_jac(1, 2) * (-fy * iz2);
    dp.z() += d_jac(0, 0) * (-fx * iz2) + d_jac(0, 2) * (S(2) * fx * p.x() * iz3) +
              d_jac(1, 1) * (-fy * iz2) + d_jac(1, 2) * (S(2) * fy * p.y() * iz3);
  }
  d_x = r.transpose() * dp;
}

template <typename S> std::vector<int> depth_order(std::span<const Splat2D<S>> splats) {
  std::vector<int> order(splats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return splats[a].depth < splats[b].depth; });
  return order;
}

namespace {

template <typename S> bool splat_finite(const Splat2D<S>& s) {
  return s.mean.allFinite() && s.conic.allFinite() && s.color.allFinite() &&
         std::isfinite(s.alpha0) && std::isfinite(s.depth) && std::isfinite(s.extent_x) &&
         std::isfinite(s.extent_y);
}

// Returns false when the pixel lies outside the cut-off ellipse.
template <typename S>
inline bool splat_alpha(const Splat2D<S>& s, S px, S py, S cutoff2, S& alpha, S& dx, S& dy,
                        S& q) {
  dx = px - s.mean.x();
  dy = py - s.mean.y();
  q = s.conic[0] * dx * dx + S(2) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
  if (q > cutoff2) return false;
  alpha = s.alpha0 * std::exp(S(-0.5) * q);
  return true;
}

template <typename S> void check_target(const RenderTarget& t) {
  require(t.width > 0 && t.height > 0, ErrorKind::InvalidParameter, "render size must be > 0");
  require(t.tile_size > 0, ErrorKind::InvalidParameter, "tile size must be > 0");
}

}  // namespace

template <typename S>
RasterOutput<S> rasterize(std::span<const Splat2D<S>> splats, const RenderTarget& target,
                          const RasterSettings& settings, RasterCache<S>* cache_out) {
  check_target<S>(target);
  RasterCache<S> local;
  RasterCache<S>& cache = cache_out ? *cache_out : local;
  const int ts = target.tile_size;
  cache.tiles_x = (target.width + ts - 1) / ts;
  cache.tiles_y = (target.height + ts - 1) / ts;
  cache.tiles.assign(static_cast<size_t>(cache.tiles_x) * cache.tiles_y, {});
  cache.order = depth_order(splats);
  cache.rejected.assign(splats.size(), 0);

  RasterOutput<S> out;
  for (int idx : cache.order) {
    const auto& s = splats[idx];
    if (!splat_finite(s)) {
      cache.rejected[idx] = 1;
      ++out.rejected;
      continue;
    }
    // One pixel of padding keeps boundary pixel centres inside the binned tiles.
    const double x0 = double(s.mean.x() - s.extent_x) - 1.0, x1 = double(s.mean.x() + s.extent_x) + 1.0;
    const double y0 = double(s.mean.y() - s.extent_y) - 1.0, y1 = double(s.mean.y() + s.extent_y) + 1.0;
    const int tx0 = std::max(0, static_cast<int>(std::floor(x0 / ts)));
    const int tx1 = std::min(cache.tiles_x - 1, static_cast<int>(std::floor(x1 / ts)));
    const int ty0 = std::max(0, static_cast<int>(std::floor(y0 / ts)));
    const int ty1 = std::min(cache.tiles_y - 1, static_cast<int>(std::floor(y1 / ts)));
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        cache.tiles[static_cast<size_t>(ty) * cache.tiles_x + tx].push_back(idx);
  }

  out.image = Image<S>(target.width, target.height);
  out.transmittance.assign(out.image.pixels(), S(1));
  const S cutoff2 = S(settings.extent_sigma * settings.extent_sigma);
  const S term = S(settings.termination);
  const Vec3<S> bg = target.background.template cast<S>();
  const int n_tiles = static_cast<int>(cache.tiles.size());

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = cache.tiles[tile];
    const int tx = tile % cache.tiles_x, ty = tile / cache.tiles_x;
    const int px_end = std::min(target.width, (tx + 1) * ts);
    const int py_end = std::min(target.height, (ty + 1) * ts);
    for (int py = ty * ts; py < py_end; ++py) {
      for (int px = tx * ts; px < px_end; ++px) {
        const S fx = S(px) + S(0.5), fy = S(py) + S(0.5);
        Vec3<S> c = Vec3<S>::Zero();
        S t = S(1);
        for (int idx : list) {
          const auto& s = splats[idx];
          S a = S(0), dx, dy, q;
          if (!splat_alpha(s, fx, fy, cutoff2, a, dx, dy, q)) continue;
          c += s.color * (a * t);
          t *= S(1) - a;
          if (t < term) break;
        }
        c += bg * t;
        for (int ch = 0; ch < 3; ++ch) out.image.at(px, py, ch) = c[ch];
        out.transmittance[static_cast<size_t>(py) * target.width + px] = t;
      }
    }
  }
  return out;
}

template <typename S>
RasterOutput<S> rasterize_reference(std::span<const Splat2D<S>> splats,
                                    const RenderTarget& target, const RasterSettings& settings) {
  check_target<S>(target);
  RasterOutput<S> out;
  out.image = Image<S>(target.width, target.height);
  out.transmittance.assign(out.image.pixels(), S(1));
  const S cutoff2 = S(settings.extent_sigma * settings.extent_sigma);
  const Vec3<S> bg = target.background.template cast<S>();
  std::vector<int> valid;
  for (size_t i = 0; i < splats.size(); ++i) {
    if (splat_finite(splats[i]))
      valid.push_back(static_cast<int>(i));
    else
      ++out.rejected;
  }
  std::vector<std::pair<S, int>> hits;
  for (int py = 0; py < target.height; ++py) {
    for (int px = 0; px < target.width; ++px) {
      const S fx = S(px) + S(0.5), fy = S(py) + S(0.5);
      hits.clear();
      for (int idx : valid) {
        S a = S(0), dx, dy, q;
        if (splat_alpha(splats[idx], fx, fy, cutoff2, a, dx, dy, q))
          hits.emplace_back(splats[idx].depth, idx);
      }
      std::sort(hits.begin(), hits.end());
      Vec3<S> c = Vec3<S>::Zero();
      S t = S(1);
      for (const auto& [depth, idx] : hits) {
        S a = S(0), dx, dy, q;
        splat_alpha(splats[idx], fx, fy, cutoff2, a, dx, dy, q);
        c += splats[idx].color * (a * t);
        t *= S(1) - a;
      }
      c += bg * t;
      for (int ch = 0; ch < 3; ++ch) out.image.at(px, py, ch) = c[ch];
      out.transmittance[static_cast<size_t>(py) * target.width + px] = t;
    }
  }
  return out;
}

template <typename S>
std::vector<SplatGrad<S>> rasterize_backward(std::span<const Splat2D<S>> splats,
                                             const RenderTarget& target,
                                             const RasterSettings& settings,
                                             const RasterCache<S>& cache,
                                             const Image<S>& d_image) {
  require(d_image.width == target.width && d_image.height == target.height, ErrorKind::Shape,
          "image gradient has the wrong size");
  require(static_cast<int>(cache.tiles.size()) == cache.tiles_x * cache.tiles_y,
          ErrorKind::Shape, "raster cache does not match the target");
  const int ts = target.tile_size;
  const S cutoff2 = S(settings.extent_sigma * settings.extent_sigma);
  const S term = S(settings.termination);
  const Vec3<S> bg = target.background.template cast<S>();
  const int n_tiles = static_cast<int>(cache.tiles.size());
  constexpr int kW = 9;

  // Per-tile buffers reduced afterwards in tile order so the result does
  // not depend on the thread count.
  std::vector<std::vector<S>> tile_grads(n_tiles);

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = cache.tiles[tile];
    auto& g = tile_grads[tile];
    g.assign(list.size() * kW, S(0));
    if (list.empty()) continue;
    const int tx = tile % cache.tiles_x, ty = tile / cache.tiles_x;
    const int px_end = std::min(target.width, (tx + 1) * ts);
    const int py_end = std::min(target.height, (ty + 1) * ts);
    struct Hit {
      int slot;
      S alpha, t, dx, dy, falloff;
    };
    std::vector<Hit> hits;
    for (int py = ty * ts; py < py_end; ++py) {
      for (int px = tx * ts; px < px_end; ++px) {
        const S fx = S(px) + S(0.5), fy = S(py) + S(0.5);
        hits.clear();
        S t = S(1);
        for (int slot = 0; slot < static_cast<int>(list.size()); ++slot) {
          S a = S(0), dx, dy, q;
          if (!splat_alpha(splats[list[slot]], fx, fy, cutoff2, a, dx, dy, q)) continue;
          hits.push_back({slot, a, t, dx, dy, std::exp(S(-0.5) * q)});
          t *= S(1) - a;
          if (t < term) break;
        }
        const Vec3<S> dc(d_image.at(px, py, 0), d_image.at(px, py, 1), d_image.at(px, py, 2));
        Vec3<S> behind = bg;
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const auto& s = splats[list[it->slot]];
          S* gs = &g[static_cast<size_t>(it->slot) * kW];
          const S w = it->alpha * it->t;
          gs[4] += dc[0] * w;
          gs[5] += dc[1] * w;
          gs[6] += dc[2] * w;
          const S d_alpha = it->t * dc.dot(s.color - behind);
          behind = s.color * it->alpha + behind * (S(1) - it->alpha);
          gs[7] += d_alpha * it->falloff;
          const S d_q = S(-0.5) * it->alpha * d_alpha;
          const S dx = it->dx, dy = it->dy;
          gs[0] += d_q * S(-2) * (s.conic[0] * dx + s.conic[1] * dy);
          gs[1] += d_q * S(-2) * (s.conic[1] * dx + s.conic[2] * dy);
          gs[2] += d_q * dx * dx;
          gs[3] += d_q * S(2) * dx * dy;
          gs[8] += d_q * dy * dy;
        }
      }
    }
  }

  std::vector<SplatGrad<S>> grads(splats.size());
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = cache.tiles[tile];
    const auto& g = tile_grads[tile];
    for (size_t slot = 0; slot < list.size(); ++slot) {
      const S* gs = &g[slot * kW];
      auto& out = grads[list[slot]];
      out.mean += Vec2<S>(gs[0], gs[1]);
      out.conic += Vec3<S>(gs[2], gs[3], gs[8]);
      out.color += Vec3<S>(gs[4], gs[5], gs[6]);
      out.alpha0 += gs[7];
    }
  }
  return grads;
}

#define GAVATAR_INSTANTIATE_RENDER(S)                                                          \
  template std::optional<Splat2D<S>> project_gaussian<S>(const Vec3<S>&, const Mat3<S>&,       \
                                                         const Camera&, const RasterSettings&, \
                                                         ProjectionCache<S>*);                  \
  template void project_gaussian_backward<S>(const Splat2D<S>&, const ProjectionCache<S>&,     \
                                             const Camera&, const Vec2<S>&, const Vec3<S>&,    \
                                             Vec3<S>&, Mat3<S>&);                               \
  template std::vector<int> depth_order<S>(std::span<const Splat2D<S>>);                       \
  template RasterOutput<S> rasterize<S>(std::span<const Splat2D<S>>, const RenderTarget&,      \
                                        const RasterSettings&, RasterCache<S>*);               \
  template RasterOutput<S> rasterize_reference<S>(std::span<const Splat2D<S>>,                 \
                                                  const RenderTarget&, const RasterSettings&); \
  template std::vector<SplatGrad<S>> rasterize_backward<S>(                                    \
      std::span<const Splat2D<S>>, const RenderTarget&, const RasterSettings&,                 \
      const RasterCache<S>&, const Image<S>&);

GAVATAR_INSTANTIATE_RENDER(float)
GAVATAR_INSTANTIATE_RENDER(double)

}  // namespace gavatar
