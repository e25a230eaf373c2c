#include "gavatar/synth.hpp"

#include "gavatar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gavatar {

namespace {

constexpr double kPi = std::numbers::pi;

double smoothstep(double e0, double e1, double x) {
  const double s = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

// Point and outward normal on the analytic capsule surface for ring height
// parameter y and azimuth theta.
void capsule_point(double y, double theta, const SynthConfig& cfg, Vec3d& p, Vec3d& n) {
  const double r = cfg.radius;
  Vec3d axis(0.0, std::clamp(y, r, cfg.height - r), 0.0);
  double ring;
  if (y < r) {
    const double dy = r - y;
    ring = std::sqrt(std::max(0.0, r * r - dy * dy));
  } else if (y > cfg.height - r) {
    const double dy = y - (cfg.height - r);
    ring = std::sqrt(std::max(0.0, r * r - dy * dy));
  } else {
    ring = r;
  }
  p = Vec3d(ring * std::sin(theta), y, ring * std::cos(theta));
  n = (p - axis).normalized();
}

}  // namespace

double upper_bone_weight(double y, const SynthConfig& cfg) {
  const double mid = 0.5 * cfg.height;
  return smoothstep(mid - 0.1 * cfg.height, mid + 0.1 * cfg.height, y);
}

CanonicalMesh make_capsule_mesh(const SynthConfig& cfg) {
  require(cfg.segments >= 3 && cfg.cap_rings >= 1 && cfg.body_rings >= 0, ErrorKind::Config,
          "capsule resolution too low");
  require(cfg.radius > 0.0 && cfg.height > 2.0 * cfg.radius, ErrorKind::Config,
          "capsule height must exceed its diameter");
  const double r = cfg.radius, h = cfg.height;
  std::vector<double> ring_y;
  for (int k = 1; k <= cfg.cap_rings; ++k)
    ring_y.push_back(r - r * std::cos(0.5 * kPi * k / cfg.cap_rings));
  for (int j = 1; j <= cfg.body_rings; ++j)
    ring_y.push_back(r + (h - 2.0 * r) * j / (cfg.body_rings + 1));
  for (int k = cfg.cap_rings; k >= 1; --k)
    ring_y.push_back(h - r + r * std::cos(0.5 * kPi * k / cfg.cap_rings));

  CanonicalMesh m;
  m.vertices.push_back(Vec3d(0.0, 0.0, 0.0));
  for (double y : ring_y)
    for (int s = 0; s < cfg.segments; ++s) {
      Vec3d p, n;
      capsule_point(y, 2.0 * kPi * s / cfg.segments, cfg, p, n);
      m.vertices.push_back(p);
    }
  m.vertices.push_back(Vec3d(0.0, h, 0.0));
  const int top = static_cast<int>(m.vertices.size()) - 1;
  const int nr = static_cast<int>(ring_y.size());
  auto idx = [&](int ring, int s) { return 1 + ring * cfg.segments + (s % cfg.segments); };

  auto add = [&](int a, int b, int c) {
    const Vec3d& pa = m.vertices[a];
    const Vec3d nrm = (m.vertices[b] - pa).cross(m.vertices[c] - pa);
    const Vec3d centroid = (pa + m.vertices[b] + m.vertices[c]) / 3.0;
    const Vec3d axis(0.0, std::clamp(centroid.y(), r, h - r), 0.0);
    if (nrm.dot(centroid - axis) < 0.0)
      m.faces.push_back({a, c, b});
    else
      m.faces.push_back({a, b, c});
  };
  for (int s = 0; s < cfg.segments; ++s) add(0, idx(0, s), idx(0, s + 1));
  for (int k = 0; k + 1 < nr; ++k)
    for (int s = 0; s < cfg.segments; ++s) {
      add(idx(k, s), idx(k, s + 1), idx(k + 1, s + 1));
      add(idx(k, s), idx(k + 1, s + 1), idx(k + 1, s));
    }
  for (int s = 0; s < cfg.segments; ++s) add(top, idx(nr - 1, s + 1), idx(nr - 1, s));

  const int nv = m.vertex_count();
  m.skin_weights = MatX<double>::Zero(nv, 2);
  m.labels.assign(nv, Region::Torso);
  for (int v = 0; v < nv; ++v) {
    const double y = m.vertices[v].y();
    const double w = upper_bone_weight(y, cfg);
    m.skin_weights(v, 0) = 1.0 - w;
    m.skin_weights(v, 1) = w;
    if (y < r - 1e-9) m.labels[v] = Region::Hand;
    if (y > h - r + 1e-9) m.labels[v] = Region::Face;
  }
  m.validate();
  return m;
}

Rig make_capsule_rig(const SynthConfig& cfg) {
  return Rig({-1, 0}, {Vec3d::Zero(), Vec3d(0.0, 0.5 * cfg.height, 0.0)}, {"root", "upper"});
}

std::vector<PoseFrame> make_pose_script(const SynthConfig& cfg) {
  require(cfg.poses >= 1 && cfg.fps > 0.0, ErrorKind::Config, "bad pose script settings");
  std::vector<PoseFrame> poses;
  const double bend = cfg.max_bend_deg * kPi / 180.0;
  for (int f = 0; f < cfg.poses; ++f) {
    const double ph = 2.0 * kPi * f / cfg.poses;
    PoseFrame p = PoseFrame::rest(2, f / cfg.fps);
    p.euler[0] = Vec3d(0.0, 0.4 * std::sin(ph), 0.0);
    p.euler[1] = Vec3d(0.4 * bend * std::cos(ph), 0.0, bend * std::sin(ph));
    p.translation = Vec3d(0.05 * std::sin(ph), 0.0, 0.0);
    poses.push_back(std::move(p));
  }
  return poses;
}

std::vector<Camera> make_camera_ring(const SynthConfig& cfg) {
  require(cfg.train_cameras >= 1 && cfg.image_size >= 11, ErrorKind::Config,
          "need at least one camera and images of at least 11 pixels");
  const Vec3d target(0.0, 0.5 * cfg.height, 0.0);
  auto at = [&](double az_deg, double el_deg) {
    const double az = az_deg * kPi / 180.0, el = el_deg * kPi / 180.0;
    const Vec3d eye = target + cfg.camera_distance * Vec3d(std::cos(el) * std::sin(az),
                                                           std::sin(el),
                                                           std::cos(el) * std::cos(az));
    return Camera::look_at(eye, target, Vec3d::UnitY(), cfg.fov_y_deg, cfg.image_size,
                           cfg.image_size);
  };
  std::vector<Camera> cams;
  const double step = 360.0 / cfg.train_cameras;
  for (int k = 0; k < cfg.train_cameras; ++k) cams.push_back(at(step * k, 10.0));
  cams.push_back(at(0.5 * step, 20.0));
  return cams;
}

Vec3d capsule_texture(const Vec3d& p, const Vec3d& n, const SynthConfig& cfg) {
  const double y = p.y() / cfg.height;
  const double theta = std::atan2(p.x(), p.z());
  Vec3d c(0.55 + 0.25 * (y - 0.5), 0.45 + 0.15 * std::sin(2.0 * kPi * y),
          0.5 - 0.25 * (y - 0.5));
  c += 0.08 * Vec3d(std::cos(theta), 0.5 * std::sin(theta), -std::cos(theta));
  c += 0.06 * n;
  const double r = cfg.radius;
  if (p.y() < r || p.y() > cfg.height - r) {
    // Fine stripes on the labelled caps.
    const double s = std::sin(90.0 * p.y() + 4.0 * theta);
    c += Vec3d(0.15, -0.12, 0.1) * s;
  } else {
    c += Vec3d(0.04, 0.04, -0.04) * std::sin(25.0 * p.y());
  }
  return c.cwiseMax(0.05).cwiseMin(0.95);
}

double scripted_ao(const Vec3d& x0, const PoseFrame& pose, const SynthConfig& cfg) {
  if (cfg.dimming <= 0.0 || pose.euler.size() < 2) return 1.0;
  const double bend = std::min(1.0, pose.euler[1].norm() / (cfg.max_bend_deg * kPi / 180.0));
  const double d = (x0.y() - 0.5 * cfg.height) / (0.15 * cfg.height);
  return 1.0 - cfg.dimming * bend * std::exp(-d * d);
}

SyntheticScene make_synthetic_scene(const SynthConfig& cfg) {
  require(cfg.gt_primitives >= 1, ErrorKind::Config, "ground truth needs primitives");
  SyntheticScene sc;
  sc.config = cfg;
  sc.mesh = make_capsule_mesh(cfg);
  sc.rig = make_capsule_rig(cfg);
  sc.poses = make_pose_script(cfg);
  sc.cameras = make_camera_ring(cfg);
  sc.train_camera_count = cfg.train_cameras;

  const double r = cfg.radius, h = cfg.height;
  const double body_area = 2.0 * kPi * r * (h - 2.0 * r);
  const double cap_area = 4.0 * kPi * r * r;
  const double spacing = std::sqrt((body_area + cap_area) / cfg.gt_primitives);
  const int n = cfg.gt_primitives;
  auto& gt = sc.ground_truth;
  gt.resize(n, 2, 3);
  const int nc = sh_coeff_count(3);
  for (int i = 0; i < n; ++i) {
    Rng rng(stream_seed(cfg.seed ^ 0x6774ull, i));
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    double y;
    if (rng.uniform() * (body_area + cap_area) < body_area) {
      y = rng.uniform(r, h - r);
    } else {
      // Uniform on the sphere: y offset uniform in [-r, r].
      const double u = rng.uniform(-r, r);
      y = u < 0.0 ? r + u : h - r + u;
    }
    Vec3d p, nrm;
    capsule_point(y, theta, cfg, p, nrm);
    Vec3d t1 = nrm.cross(Vec3d::UnitY());
    if (t1.norm() < 1e-6) t1 = nrm.cross(Vec3d::UnitX());
    t1.normalize();
    const Vec3d t2 = nrm.cross(t1);
    Mat3d rot;
    rot.col(0) = t1;
    rot.col(1) = t2;
    rot.col(2) = nrm;
    if (rot.determinant() < 0.0) rot.col(1) = -rot.col(1);
    gt.position.row(i) = p.transpose();
    gt.rotation.row(i) = matrix_to_quat<double>(rot).transpose();
    const Vec3d s(0.65 * spacing, 0.65 * spacing, 0.15 * spacing);
    for (int k = 0; k < 3; ++k) gt.scale_raw(i, k) = GaussianCloud<double>::scale_to_raw(s[k]);
    gt.opacity_logit[i] = logit(0.9);
    const Vec3d albedo = capsule_texture(p, nrm, cfg);
    for (int ch = 0; ch < 3; ++ch) {
      gt.sh(i, ch * nc + 0) = (albedo[ch] - kShDcOffset) / sh_const::C0;
      // Mild view dependence: brighter when seen head-on.
      const double k = -0.08 / sh_const::C1;
      gt.sh(i, ch * nc + 1) = -k * nrm.y();
      gt.sh(i, ch * nc + 2) = k * nrm.z();
      gt.sh(i, ch * nc + 3) = -k * nrm.x();
    }
    const double w = upper_bone_weight(y, cfg);
    gt.weights(i, 0) = 1.0 - w;
    gt.weights(i, 1) = w;
    gt.region[i] = y < r ? Region::Hand : (y > h - r ? Region::Face : Region::Torso);
    gt.source_vertex[i] = -1;
  }
  return sc;
}

Image<double> render_ground_truth(const SyntheticScene& scene, int pose, int camera,
                                  const RenderSettings& settings) {
  require(pose >= 0 && pose < static_cast<int>(scene.poses.size()), ErrorKind::InvalidParameter,
          "pose index out of range");
  require(camera >= 0 && camera < static_cast<int>(scene.cameras.size()),
          ErrorKind::InvalidParameter, "camera index out of range");
  const auto& gt = scene.ground_truth;
  PrimitiveAttributes<double> attrs;
  attrs.offset = MatX<double>::Zero(gt.size(), 3);
  attrs.sh = gt.sh;
  attrs.ao = VecX<double>::Ones(gt.size());
  for (int i = 0; i < gt.size(); ++i)
    attrs.ao[i] = scripted_ao(gt.position.row(i).transpose(), scene.poses[pose], scene.config);
  FrameInput frame;
  frame.pose = scene.poses[pose];
  frame.camera = scene.cameras[camera];
  frame.t_norm = normalize_time(frame.pose.t, scene.t_min(), scene.t_max());
  std::vector<Vec3d> joints(scene.rig.rest_positions().begin(), scene.rig.rest_positions().end());
  return render_attributes<double>(scene.rig, joints, gt, attrs, frame, settings, nullptr, nullptr,
                                   /*reference=*/true);
}

}  // namespace gavatar
