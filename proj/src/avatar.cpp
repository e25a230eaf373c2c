#include "gavatar/avatar.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace gavatar {

std::string RenderReport::to_json() const {
  nlohmann::json j{{"primitives", primitives},
                   {"visible", visible},
                   {"culled", culled},
                   {"singular_blend", singular_blend},
                   {"rejected", rejected}};
  return j.dump();
}

template <typename S> void AvatarModel<S>::validate() const {
  require(static_cast<int>(joints.size()) == rig.joint_count(), ErrorKind::Shape,
          "joint positions do not match the rig");
  require(cloud.joint_count() == rig.joint_count(), ErrorKind::Shape,
          "cloud weights do not match the rig");
  require(cloud.sh_degree == field.config().sh_degree, ErrorKind::Shape,
          "cloud and field SH degrees differ");
  require(priors != nullptr, ErrorKind::Validation, "model has no priors");
}

template <typename S>
template <typename T>
AvatarModel<T> AvatarModel<S>::cast() const {
  AvatarModel<T> m;
  m.rig = rig;
  for (const auto& j : joints) m.joints.push_back(j.template cast<T>());
  m.cloud = cloud.template cast<T>();
  m.field = field.template cast<T>();
  m.priors = priors;
  m.switches = switches;
  m.optimize_joints = optimize_joints;
  return m;
}

template <typename S> GradientSet<S> GradientSet<S>::zeros_like(const AvatarModel<S>& m) {
  GradientSet g;
  const auto& c = m.cloud;
  g.position = MatX<S>::Zero(c.size(), 3);
  g.rotation = MatX<S>::Zero(c.size(), 4);
  g.scale_raw = MatX<S>::Zero(c.size(), 3);
  g.opacity_logit = VecX<S>::Zero(c.size());
  g.sh = MatX<S>::Zero(c.size(), c.sh.cols());
  g.joints.assign(m.joints.size(), Vec3<S>::Zero());
  g.low = VecX<S>::Zero(m.field.low.params().size());
  g.high = VecX<S>::Zero(m.field.high.params().size());
  g.decoder = VecX<S>::Zero(m.field.decoder.params().size());
  g.ao_decoder = VecX<S>::Zero(m.field.ao_decoder.params().size());
  return g;
}

template <typename S> void GradientSet<S>::add(const GradientSet& o, S scale) {
  position += scale * o.position;
  rotation += scale * o.rotation;
  scale_raw += scale * o.scale_raw;
  opacity_logit += scale * o.opacity_logit;
  sh += scale * o.sh;
  for (size_t i = 0; i < joints.size(); ++i) joints[i] += scale * o.joints[i];
  low += scale * o.low;
  high += scale * o.high;
  decoder += scale * o.decoder;
  ao_decoder += scale * o.ao_decoder;
}

namespace {
template <typename S> std::string find_bad(const char* name, const S* p, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return std::string(name) + "[" + std::to_string(i) + "]";
  return {};
}
}  // namespace

template <typename S> std::string GradientSet<S>::first_non_finite() const {
  std::string r;
  if (!(r = find_bad("position", position.data(), position.size())).empty()) return r;
  if (!(r = find_bad("rotation", rotation.data(), rotation.size())).empty()) return r;
  if (!(r = find_bad("scale", scale_raw.data(), scale_raw.size())).empty()) return r;
  if (!(r = find_bad("opacity", opacity_logit.data(), opacity_logit.size())).empty()) return r;
  if (!(r = find_bad("sh", sh.data(), sh.size())).empty()) return r;
  if (!joints.empty() &&
      !(r = find_bad("joints", joints[0].data(), 3 * Eigen::Index(joints.size()))).empty())
    return r;
  if (!(r = find_bad("hash_low", low.data(), low.size())).empty()) return r;
  if (!(r = find_bad("hash_high", high.data(), high.size())).empty()) return r;
  if (!(r = find_bad("decoder", decoder.data(), decoder.size())).empty()) return r;
  return find_bad("ao_decoder", ao_decoder.data(), ao_decoder.size());
}

template <typename S> S GradientSet<S>::max_abs() const {
  S m = S(0);
  auto upd = [&](const auto& x) {
    if (x.size() > 0) m = std::max(m, x.cwiseAbs().maxCoeff());
  };
  upd(position);
  upd(rotation);
  upd(scale_raw);
  upd(opacity_logit);
  upd(sh);
  for (const auto& j : joints) upd(j);
  upd(low);
  upd(high);
  upd(decoder);
  upd(ao_decoder);
  return m;
}

template <typename S>
PrimitiveAttributes<S> evaluate_attributes(const AvatarModel<S>& model, double t_norm,
                                           bool ao_frozen, FieldCache<S>* cache_out) {
  const auto& cloud = model.cloud;
  const auto& field = model.field;
  const auto& sw = model.switches;
  const int n = cloud.size();
  FieldCache<S> local;
  FieldCache<S>& fc = cache_out ? *cache_out : local;
  fc = FieldCache<S>{};

  PrimitiveAttributes<S> a;
  a.offset = MatX<S>::Zero(n, 3);
  a.sh = cloud.sh;
  a.ao = VecX<S>::Ones(n);

  fc.decoder_used = sw.hash_sh || sw.hash_vd;
  if (fc.decoder_used) {
    require(model.priors != nullptr, ErrorKind::Validation, "model has no priors");
    const DecoderLayout lay = field.layout();
    fc.z.resize(n, lay.width);
    const S* tau = cloud.tau.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const Vec3<S> x0 = cloud.position.row(i).transpose();
      field.assemble_input(x0, tau[i], *model.priors, t_norm, sw,
                           std::span<S>(fc.z.data() + static_cast<size_t>(i) * lay.width,
                                        lay.width));
    }
    fc.decoder_out = field.decoder.forward(fc.z, &fc.decoder);
    const S m = S(field.config().max_offset);
    if (sw.hash_vd)
      a.offset = (fc.decoder_out.leftCols(3).array().tanh() * m).matrix();
    if (sw.hash_sh) a.sh = fc.decoder_out.rightCols(fc.decoder_out.cols() - 3);
  }

  fc.ao_used = sw.ao && !ao_frozen;
  if (fc.ao_used) {
    const int nl = field.low.output_dim();
    const int width = field.config().ao_input_dim();
    fc.ao_in.resize(n, width);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      S* row = fc.ao_in.data() + static_cast<size_t>(i) * width;
      const Vec3<S> x0 = cloud.position.row(i).transpose();
      field.low.query(x0, std::span<S>(row, nl));
      temporal_encoding<S>(t_norm, field.config().time_frequencies, row + nl);
    }
    const MatX<S> o = field.ao_decoder.forward(fc.ao_in, &fc.ao_decoder);
    for (int i = 0; i < n; ++i) a.ao[i] = sigmoid(o(i, 0));
  }
  return a;
}

template <typename S>
Image<S> render_attributes(const Rig& rig, std::span<const Vec3<S>> joints,
                           const GaussianCloud<S>& cloud, const PrimitiveAttributes<S>& attrs,
                           const FrameInput& frame, const RenderSettings& settings,
                           SplatCache<S>* cache_out, RenderReport* report, bool reference) {
  const int n = cloud.size();
  require(attrs.offset.rows() == n && attrs.sh.rows() == n && attrs.ao.size() == n,
          ErrorKind::Shape, "attribute rows do not match the cloud");
  require(attrs.sh.cols() == cloud.sh_block(), ErrorKind::Shape, "SH block width mismatch");
  frame.camera.validate();
  SplatCache<S> local;
  SplatCache<S>& sc = cache_out ? *cache_out : local;
  sc.bones = bone_transforms<S>(rig, frame.pose, joints);
  sc.states.assign(n, PrimitiveState<S>{});

  const Camera& cam = frame.camera;
  const bool persp = cam.model == ProjectionModel::Perspective;
  const Vec3<S> cam_center = cam.center().template cast<S>();
  const Vec3<S> cam_forward = cam.forward().template cast<S>();
  const int degree = cloud.sh_degree;
  const int nc = sh_coeff_count(degree);
  const int nb = cloud.joint_count();
  std::vector<std::optional<Splat2D<S>>> projected(n);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    auto& st = sc.states[i];
    std::span<const S> w(cloud.weights.data() + static_cast<size_t>(i) * nb, nb);
    st.blend = blend_linear<S>(w, sc.bones);
    st.x_canonical = (cloud.position.row(i) + attrs.offset.row(i)).transpose();
    st.x_posed = lbs_point<S>(st.x_canonical, w, sc.bones);
    st.rotation = rotation_from_raw_quat<S>(cloud.rotation.row(i).transpose());
    st.scale = cloud.scale(i);
    st.cov_map = settings.polar ? polar_rotation<S>(st.blend) : st.blend;
    const Mat3<S> sigma = covariance_from_map<S>(st.cov_map * st.rotation, st.scale);

    if (persp) {
      const Vec3<S> v = st.x_posed - cam_center;
      st.view_distance = v.norm();
      st.dir_posed = v / st.view_distance;
    } else {
      st.dir_posed = cam_forward;
    }
    const S det = st.blend.determinant();
    if (std::abs(static_cast<double>(det)) > kSingularBlendDet) {
      st.dir_pre = st.blend.inverse() * st.dir_posed;
      st.dir_canonical = st.dir_pre.normalized();
    } else {
      st.singular = true;
      st.dir_pre = st.dir_posed;
      st.dir_canonical = st.dir_posed;
    }
    std::array<S, kMaxShCoeffs> y{};
    sh_basis<S>(degree, st.dir_canonical, y.data());
    const S* block = attrs.sh.data() + static_cast<size_t>(i) * attrs.sh.cols();
    for (int ch = 0; ch < 3; ++ch) {
      S acc = S(kShDcOffset);
      for (int k = 0; k < nc; ++k) acc += block[ch * nc + k] * y[k];
      st.color_raw[ch] = acc;
    }
    st.alpha0 = cloud.opacity(i);

    auto sp = project_gaussian<S>(st.x_posed, sigma, cam, settings.raster, &st.projection);
    if (sp) {
      sp->color = st.color_raw.cwiseMax(S(0)) * attrs.ao[i];
      sp->alpha0 = st.alpha0;
      sp->source = i;
    }
    projected[i] = std::move(sp);
  }

  sc.splats.clear();
  RenderReport rep;
  rep.primitives = n;
  for (int i = 0; i < n; ++i) {
    if (sc.states[i].singular) ++rep.singular_blend;
    if (projected[i]) {
      sc.states[i].splat = static_cast<int>(sc.splats.size());
      sc.splats.push_back(*projected[i]);
    } else {
      ++rep.culled;
    }
  }
  rep.visible = static_cast<int>(sc.splats.size());

  RenderTarget target;
  target.width = cam.width;
  target.height = cam.height;
  target.background = settings.background;
  target.tile_size = settings.tile_size;
  std::span<const Splat2D<S>> splats(sc.splats);
  RasterOutput<S> out = reference ? rasterize_reference<S>(splats, target, settings.raster)
                                  : rasterize<S>(splats, target, settings.raster, &sc.raster);
  rep.rejected = out.rejected;
  if (report) *report = rep;
  return std::move(out.image);
}

template <typename S>
Image<S> render_avatar(const AvatarModel<S>& model, const FrameInput& frame,
                       const RenderSettings& settings, AvatarCache<S>* cache_out,
                       bool reference) {
  model.validate();
  AvatarCache<S> local;
  AvatarCache<S>& c = cache_out ? *cache_out : local;
  c.attributes = evaluate_attributes(model, frame.t_norm, frame.ao_frozen, &c.field);
  return render_attributes<S>(model.rig, model.joints, model.cloud, c.attributes, frame,
                              settings, &c.splat, &c.report, reference);
}

template <typename S>
GradientSet<S> avatar_backward(const AvatarModel<S>& model, const FrameInput& frame,
                               const RenderSettings& settings, const AvatarCache<S>& cache,
                               const Image<S>& d_image) {
  const auto& cloud = model.cloud;
  const auto& field = model.field;
  const auto& sw = model.switches;
  const auto& sc = cache.splat;
  const auto& attrs = cache.attributes;
  const int n = cloud.size();
  const int nb = cloud.joint_count();
  const int degree = cloud.sh_degree;
  const int nc = sh_coeff_count(degree);
  const Camera& cam = frame.camera;
  const bool persp = cam.model == ProjectionModel::Perspective;
  require(static_cast<int>(sc.states.size()) == n, ErrorKind::Shape,
          "backward called without a matching forward cache");

  GradientSet<S> g = GradientSet<S>::zeros_like(model);
  RenderTarget target;
  target.width = cam.width;
  target.height = cam.height;
  target.background = settings.background;
  target.tile_size = settings.tile_size;
  const std::vector<SplatGrad<S>> sg = rasterize_backward<S>(
      std::span<const Splat2D<S>>(sc.splats), target, settings.raster, sc.raster, d_image);

  MatX<S> d_xc = MatX<S>::Zero(n, 3);
  MatX<S> d_sh = MatX<S>::Zero(n, attrs.sh.cols());
  MatX<S> d_bone_t = MatX<S>::Zero(n, 3);
  VecX<S> d_ao = VecX<S>::Zero(n);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto& st = sc.states[i];
    if (st.splat < 0) continue;
    const auto& splat = sc.splats[st.splat];
    const auto& gs = sg[st.splat];
    const S ao = attrs.ao[i];

    // Opacity.
    g.opacity_logit[i] = gs.alpha0 * st.alpha0 * (S(1) - st.alpha0);

    // Colour: c = ao * max(raw, 0).
    Vec3<S> d_raw;
    for (int ch = 0; ch < 3; ++ch) {
      const bool pos = st.color_raw[ch] > S(0);
      d_raw[ch] = pos ? gs.color[ch] * ao : S(0);
      d_ao[i] += pos ? gs.color[ch] * st.color_raw[ch] : S(0);
    }
    std::array<S, kMaxShCoeffs> y{};
    Eigen::Matrix<S, kMaxShCoeffs, 3> dy;
    sh_basis<S>(degree, st.dir_canonical, y.data(), &dy);
    const S* block = attrs.sh.data() + static_cast<size_t>(i) * attrs.sh.cols();
    Vec3<S> d_dir_c = Vec3<S>::Zero();
    for (int ch = 0; ch < 3; ++ch) {
      for (int k = 0; k < nc; ++k) {
        d_sh(i, ch * nc + k) = d_raw[ch] * y[k];
        d_dir_c += d_raw[ch] * block[ch * nc + k] * dy.row(k).transpose();
      }
    }

    // View direction: dir_c = normalize(blend^-1 dir_t).
    // The blended bone map depends only on the pose and the fixed weights,
    // so no gradient is propagated into it.
    Vec3<S> d_dir_t;
    if (st.singular) {
      d_dir_t = d_dir_c;
    } else {
      const S un = st.dir_pre.norm();
      const Vec3<S> d_u = (d_dir_c - st.dir_canonical * st.dir_canonical.dot(d_dir_c)) / un;
      const Mat3<S> inv_t = st.blend.inverse().transpose();
      d_dir_t = inv_t * d_u;
    }
    Vec3<S> d_xt = Vec3<S>::Zero();
    if (persp)
      d_xt += (d_dir_t - st.dir_posed * st.dir_posed.dot(d_dir_t)) / st.view_distance;

    // Projection.
    Vec3<S> dx_proj;
    Mat3<S> d_sigma;
    project_gaussian_backward<S>(splat, st.projection, cam, gs.mean, gs.conic, dx_proj, d_sigma);
    d_xt += dx_proj;

    // Sigma = L diag(s^2) L^T with L = cov_map * R.
    const Mat3<S> l = st.cov_map * st.rotation;
    const Vec3<S> s2 = st.scale.cwiseProduct(st.scale);
    const Mat3<S> d_sym = d_sigma + d_sigma.transpose();
    const Mat3<S> d_l = d_sym * l * s2.asDiagonal();
    const Mat3<S> d_diag = l.transpose() * d_sigma * l;
    for (int k = 0; k < 3; ++k)
      g.scale_raw(i, k) = d_diag(k, k) * S(2) * st.scale[k] * (st.scale[k] - S(kScaleFloor));
    const Mat3<S> d_rot = st.cov_map.transpose() * d_l;
    const Vec4<S> dq =
        rotation_from_raw_quat_backward<S>(cloud.rotation.row(i).transpose(), d_rot);
    g.rotation.row(i) = dq.transpose();

    // x_t = blend * x_c + t.
    d_xc.row(i) = (st.blend.transpose() * d_xt).transpose();
    d_bone_t.row(i) = d_xt.transpose();
  }

  // Skeleton joints through the bone translations, reduced in primitive order.
  if (model.optimize_joints) {
    std::vector<Vec3<S>> d_trans(nb, Vec3<S>::Zero());
    for (int i = 0; i < n; ++i) {
      if (sc.states[i].splat < 0) continue;
      for (int j = 0; j < nb; ++j) {
        const S w = cloud.weights(i, j);
        if (w != S(0)) d_trans[j] += w * d_bone_t.row(i).transpose();
      }
    }
    bone_transforms_backward<S>(model.rig, sc.bones, model.joints, d_trans, g.joints);
  }

  g.position = d_xc;
  if (!sw.hash_sh) g.sh = d_sh;

  const auto& fc = cache.field;
  const DecoderLayout lay = field.layout();
  MatX<S> d_z;
  if (fc.decoder_used) {
    MatX<S> d_out = MatX<S>::Zero(n, fc.decoder_out.cols());
    if (sw.hash_vd) {
      const S m = S(field.config().max_offset);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
          const S th = std::tanh(fc.decoder_out(i, k));
          d_out(i, k) = d_xc(i, k) * m * (S(1) - th * th);
        }
    }
    if (sw.hash_sh) d_out.rightCols(d_out.cols() - 3) = d_sh;
    d_z = field.decoder.backward(fc.decoder, d_out, g.decoder);
  }

  MatX<S> d_ao_in;
  if (fc.ao_used) {
    MatX<S> d_o(n, 1);
    for (int i = 0; i < n; ++i) d_o(i, 0) = d_ao[i] * attrs.ao[i] * (S(1) - attrs.ao[i]);
    d_ao_in = field.ao_decoder.backward(fc.ao_decoder, d_o, g.ao_decoder);
  }

  // Hash tables and the canonical position through the field inputs. The
  // table scatter is serial so the accumulation order is fixed.
  if (fc.decoder_used || fc.ao_used) {
    const int nl = field.low.output_dim();
    const int nh = field.high.output_dim();
    std::vector<S> d_low(nl);
    for (int i = 0; i < n; ++i) {
      const Vec3<S> x0 = cloud.position.row(i).transpose();
      Vec3<S> d_x0 = Vec3<S>::Zero();
      std::fill(d_low.begin(), d_low.end(), S(0));
      if (fc.decoder_used)
        for (int k = 0; k < nl; ++k) d_low[k] += d_z(i, lay.low + k);
      if (fc.ao_used)
        for (int k = 0; k < nl; ++k) d_low[k] += d_ao_in(i, k);
      field.low.backward(x0, d_low, g.low, &d_x0);
      if (fc.decoder_used) {
        if (sw.multiscale && nh > 0) {
          std::vector<S> d_high(nh);
          for (int k = 0; k < nh; ++k) d_high[k] = cloud.tau[i] * d_z(i, lay.high + k);
          field.high.backward(x0, d_high, g.high, &d_x0);
        }
        if (sw.depth) {
          S grad[3];
          S val;
          for (int v = 0; v < 4; ++v) {
            sample_prior_map<S>(model.priors->depth[v], x0, &val, grad);
            for (int k = 0; k < 3; ++k) d_x0[k] += d_z(i, lay.depth + v) * grad[k];
          }
        }
        if (sw.normals) {
          S grad[9];
          S val[3];
          for (int v = 0; v < 2; ++v) {
            sample_prior_map<S>(model.priors->normal[v], x0, val, grad);
            for (int c = 0; c < 3; ++c)
              for (int k = 0; k < 3; ++k) d_x0[k] += d_z(i, lay.normal + 3 * v + c) * grad[c * 3 + k];
          }
        }
      }
      g.position.row(i) += d_x0.transpose();
    }
  }
  return g;
}

#define GAVATAR_INSTANTIATE_AVATAR(S)                                                          \
  template struct AvatarModel<S>;                                                              \
  template struct GradientSet<S>;                                                              \
  template PrimitiveAttributes<S> evaluate_attributes<S>(const AvatarModel<S>&, double, bool,  \
                                                         FieldCache<S>*);                      \
  template Image<S> render_attributes<S>(const Rig&, std::span<const Vec3<S>>,                 \
                                         const GaussianCloud<S>&, const PrimitiveAttributes<S>&, \
                                         const FrameInput&, const RenderSettings&,             \
                                         SplatCache<S>*, RenderReport*, bool);                 \
  template Image<S> render_avatar<S>(const AvatarModel<S>&, const FrameInput&,                 \
                                     const RenderSettings&, AvatarCache<S>*, bool);            \
  template GradientSet<S> avatar_backward<S>(const AvatarModel<S>&, const FrameInput&,         \
                                             const RenderSettings&, const AvatarCache<S>&,     \
                                             const Image<S>&);

GAVATAR_INSTANTIATE_AVATAR(float)
GAVATAR_INSTANTIATE_AVATAR(double)

template AvatarModel<double> AvatarModel<float>::cast<double>() const;
template AvatarModel<float> AvatarModel<double>::cast<float>() const;
template AvatarModel<float> AvatarModel<float>::cast<float>() const;
template AvatarModel<double> AvatarModel<double>::cast<double>() const;

}  // namespace gavatar
