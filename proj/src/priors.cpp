#include "gavatar/priors.hpp"

#include <cmath>
#include <numbers>

namespace gavatar {

void PriorMap::allocate(const OrthoFrame& f, int ch) {
  frame = f;
  channels = ch;
  data.assign(static_cast<size_t>(f.width) * f.height * ch, 0.0f);
  mask.assign(static_cast<size_t>(f.width) * f.height, 0);
}

void PriorMap::validate() const {
  require(frame.width >= 1 && frame.height >= 1, ErrorKind::Validation, "prior map is empty");
  require(frame.pixel_size > 0.0, ErrorKind::Validation, "prior texel size must be > 0");
  const size_t n = static_cast<size_t>(frame.width) * frame.height;
  require(mask.size() == n, ErrorKind::Validation, "prior mask resolution mismatch");
  require(data.size() == n * channels, ErrorKind::Validation, "prior data size mismatch");
}

void PriorPack::validate() const {
  for (const auto& m : depth) {
    m.validate();
    require(m.channels == 1, ErrorKind::Validation, "depth maps are single channel");
  }
  for (const auto& m : normal) {
    m.validate();
    require(m.channels == 3, ErrorKind::Validation, "normal maps have three channels");
  }
}

std::array<OrthoFrame, 4> fit_prior_frames(const BoundingBox& box, int resolution,
                                           double margin) {
  require(resolution >= 1, ErrorKind::Config, "prior resolution must be >= 1");
  const BoundingBox b = box.padded(margin);
  const Vec3d ext = b.extent();
  const double longest = std::max({ext.x(), ext.y(), ext.z()});
  const double ps = longest > 0.0 ? longest / resolution : 1.0;
  auto texels = [&](double len) { return std::max(1, static_cast<int>(std::ceil(len / ps - 1e-9))); };

  std::array<OrthoFrame, 4> f;
  const Vec3d up = Vec3d::UnitY();
  // front: looks down -z, right = +x
  f[kFront] = {Vec3d(b.lo.x(), b.hi.y(), b.hi.z()), Vec3d::UnitX(), up, -Vec3d::UnitZ(), ps,
               texels(ext.x()), texels(ext.y())};
  // back: looks down +z, right = -x
  f[kBack] = {Vec3d(b.hi.x(), b.hi.y(), b.lo.z()), -Vec3d::UnitX(), up, Vec3d::UnitZ(), ps,
              texels(ext.x()), texels(ext.y())};
  // left: looks down -x, right = -z
  f[kLeft] = {Vec3d(b.hi.x(), b.hi.y(), b.hi.z()), -Vec3d::UnitZ(), up, -Vec3d::UnitX(), ps,
              texels(ext.z()), texels(ext.y())};
  // right: looks down +x, right = +z
  f[kRight] = {Vec3d(b.lo.x(), b.hi.y(), b.lo.z()), Vec3d::UnitZ(), up, Vec3d::UnitX(), ps,
               texels(ext.z()), texels(ext.y())};
  return f;
}

template <typename S>
void sample_prior_map(const PriorMap& map, const Vec3<S>& x, S* out, S* grad) {
  const int ch = map.channels;
  for (int c = 0; c < ch; ++c) out[c] = S(0);
  if (grad)
    for (int k = 0; k < 3 * ch; ++k) grad[k] = S(0);

  const OrthoFrame& fr = map.frame;
  const Vec3<S> r = x - fr.origin.cast<S>();
  const S ps = S(fr.pixel_size);
  const S u = r.dot(fr.right.cast<S>()) / ps;
  const S v = -r.dot(fr.up.cast<S>()) / ps;
  if (!(std::isfinite(static_cast<double>(u)) && std::isfinite(static_cast<double>(v)))) return;
  const double uf = std::floor(static_cast<double>(u));
  const double vf = std::floor(static_cast<double>(v));
  if (uf < 0 || vf < 0 || uf >= fr.width || vf >= fr.height) return;
  if (!map.valid(static_cast<int>(uf), static_cast<int>(vf))) return;

  const S tx = u - S(0.5), ty = v - S(0.5);
  const int i0 = static_cast<int>(std::floor(static_cast<double>(tx)));
  const int j0 = static_cast<int>(std::floor(static_cast<double>(ty)));
  const S fx = tx - S(i0), fy = ty - S(j0);

  S num[3] = {S(0), S(0), S(0)};
  S dnum_dx[3] = {S(0), S(0), S(0)}, dnum_dy[3] = {S(0), S(0), S(0)};
  S den = S(0), dden_dx = S(0), dden_dy = S(0);
  for (int t = 0; t < 4; ++t) {
    const int di = t & 1, dj = t >> 1;
    if (!map.valid(i0 + di, j0 + dj)) continue;
    const S wx = di ? fx : S(1) - fx;
    const S wy = dj ? fy : S(1) - fy;
    const S sx = di ? S(1) : S(-1);
    const S sy = dj ? S(1) : S(-1);
    const S w = wx * wy;
    den += w;
    dden_dx += sx * wy;
    dden_dy += wx * sy;
    for (int c = 0; c < ch; ++c) {
      const S val = S(map.at(i0 + di, j0 + dj, c));
      num[c] += w * val;
      dnum_dx[c] += sx * wy * val;
      dnum_dy[c] += wx * sy * val;
    }
  }
  for (int c = 0; c < ch; ++c) out[c] = num[c] / den;
  if (grad) {
    const Vec3<S> du_dx = fr.right.cast<S>() / ps;
    const Vec3<S> dv_dx = -fr.up.cast<S>() / ps;
    for (int c = 0; c < ch; ++c) {
      const S gx = (dnum_dx[c] * den - num[c] * dden_dx) / (den * den);
      const S gy = (dnum_dy[c] * den - num[c] * dden_dy) / (den * den);
      const Vec3<S> g = gx * du_dx + gy * dv_dx;
      for (int k = 0; k < 3; ++k) grad[c * 3 + k] = g[k];
    }
  }
}

template <typename S> Vec4<S> sample_depth_prior(const PriorPack& pack, const Vec3<S>& x0) {
  Vec4<S> out;
  for (int v = 0; v < 4; ++v) sample_prior_map<S>(pack.depth[v], x0, &out[v]);
  return out;
}

template <typename S>
Eigen::Matrix<S, 6, 1> sample_normal_prior(const PriorPack& pack, const Vec3<S>& x0) {
  Eigen::Matrix<S, 6, 1> out;
  sample_prior_map<S>(pack.normal[0], x0, out.data());
  sample_prior_map<S>(pack.normal[1], x0, out.data() + 3);
  return out;
}

template <typename S> void temporal_encoding(double t_norm, int frequencies, S* out) {
  require(frequencies >= 0, ErrorKind::InvalidParameter, "frequency count must be >= 0");
  double scale = std::numbers::pi;
  for (int k = 0; k < frequencies; ++k) {
    out[2 * k] = S(std::sin(scale * t_norm));
    out[2 * k + 1] = S(std::cos(scale * t_norm));
    scale *= 2.0;
  }
}

std::vector<double> temporal_encoding(double t_norm, int frequencies) {
  require(frequencies >= 0, ErrorKind::InvalidParameter, "frequency count must be >= 0");
  std::vector<double> out(2 * static_cast<size_t>(frequencies));
  temporal_encoding<double>(t_norm, frequencies, out.data());
  return out;
}

double normalize_time(double t, double t_min, double t_max) {
  if (!(t_max > t_min)) return 0.0;
  return (t - t_min) / (t_max - t_min);
}

#define GAVATAR_INSTANTIATE_PRIORS(S)                                                     \
  template void sample_prior_map<S>(const PriorMap&, const Vec3<S>&, S*, S*);             \
  template Vec4<S> sample_depth_prior<S>(const PriorPack&, const Vec3<S>&);              \
  template Eigen::Matrix<S, 6, 1> sample_normal_prior<S>(const PriorPack&, const Vec3<S>&); \
  template void temporal_encoding<S>(double, int, S*);

GAVATAR_INSTANTIATE_PRIORS(float)
GAVATAR_INSTANTIATE_PRIORS(double)

}  // namespace gavatar
