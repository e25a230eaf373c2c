#pragma once

#include "gavatar/pipeline.hpp"
#include "gavatar/rng.hpp"
#include "gavatar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

// Finite-difference gradient checks shared by the unit suite and the
// acceptance binary.
namespace gavatar::gradcheck {

constexpr int kImage = 24;

struct Scene {
  AvatarModel<double> model;
  FrameInput frame;
  Image<double> target;
  RenderSettings rs;
};

// A tiny capsule avatar with every parameter group randomised, a random pose,
// time, camera and target. Half the scenes turn the hash colour path off so
// the per-primitive SH coefficients receive gradient.
inline Scene make_scene(int index) {
  Rng rng(stream_seed(2024, index));
  SynthConfig sc;
  sc.segments = 5;
  sc.cap_rings = 1;
  sc.body_rings = 1;
  sc.image_size = kImage;
  const CanonicalMesh mesh = make_capsule_mesh(sc);
  const Rig rig = make_capsule_rig(sc);
  ModelSpec spec;
  spec.profile.base_count = 2;
  spec.profile.max_count = 3;
  spec.prior_resolution = 32;
  spec.seed = index;
  spec.field = bundled_field_config();
  spec.field.hidden_width = 16;
  spec.field.ao_hidden_width = 8;
  Scene s{build_model(mesh, rig, spec), {}, Image<double>(kImage, kImage), {}};
  auto& m = s.model;
  for (auto* p : {&m.field.decoder.params(), &m.field.ao_decoder.params(), &m.field.low.params(),
                  &m.field.high.params()})
    for (Eigen::Index i = 0; i < p->size(); ++i) (*p)[i] = rng.uniform(-0.5, 0.5);
  for (int i = 0; i < m.cloud.size(); ++i) {
    for (int k = 0; k < 4; ++k) m.cloud.rotation(i, k) = rng.uniform(-1, 1);
    for (int k = 0; k < 3; ++k) m.cloud.scale_raw(i, k) = std::log(rng.uniform(0.03, 0.08));
    m.cloud.opacity_logit[i] = rng.uniform(-1, 2);
    for (int k = 0; k < 3; ++k) m.cloud.position(i, k) += rng.uniform(-0.01, 0.01);
    for (int k = 0; k < m.cloud.sh.cols(); ++k) m.cloud.sh(i, k) = rng.uniform(-0.3, 0.3);
  }
  for (auto& j : m.joints) j += Vec3d(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02));
  m.switches.hash_sh = index % 2 == 0;
  m.switches.ao = index % 3 != 0;
  m.switches.multiscale = index % 5 != 0;
  const auto poses = make_pose_script(sc);
  s.frame.pose = poses[rng.uniform_int(int(poses.size()))];
  s.frame.t_norm = rng.uniform();
  const double az = rng.uniform(0, 2 * M_PI), r = rng.uniform(1.8, 2.6);
  s.frame.camera = Camera::look_at(Vec3d(r * std::sin(az), rng.uniform(0.2, 0.9), r * std::cos(az)),
                                   Vec3d(0, 0.5, 0), Vec3d::UnitY(), rng.uniform(35, 50), kImage, kImage);
  for (auto& v : s.target.data) v = rng.uniform();
  s.rs.raster.extent_sigma = 8;
  s.rs.raster.termination = 0;
  s.rs.polar = index % 4 == 3;
  return s;
}

inline GradientSet<double> widen(const GradientSet<float>& g) {
  GradientSet<double> d;
  d.position = g.position.cast<double>();
  d.rotation = g.rotation.cast<double>();
  d.scale_raw = g.scale_raw.cast<double>();
  d.opacity_logit = g.opacity_logit.cast<double>();
  d.sh = g.sh.cast<double>();
  for (const auto& j : g.joints) d.joints.push_back(j.cast<double>());
  d.low = g.low.cast<double>();
  d.high = g.high.cast<double>();
  d.decoder = g.decoder.cast<double>();
  d.ao_decoder = g.ao_decoder.cast<double>();
  return d;
}

struct Group {
  std::string name;
  double* param;
  const double* grad;
  Eigen::Index size;
};

inline std::vector<Group> groups(AvatarModel<double>& m, const GradientSet<double>& g) {
  std::vector<Group> out{
      {"position", m.cloud.position.data(), g.position.data(), m.cloud.position.size()},
      {"rotation", m.cloud.rotation.data(), g.rotation.data(), m.cloud.rotation.size()},
      {"scale", m.cloud.scale_raw.data(), g.scale_raw.data(), m.cloud.scale_raw.size()},
      {"opacity", m.cloud.opacity_logit.data(), g.opacity_logit.data(), m.cloud.opacity_logit.size()},
      {"joints", m.joints[0].data(), g.joints[0].data(), Eigen::Index(3 * m.joints.size())},
      {"low", m.field.low.params().data(), g.low.data(), m.field.low.params().size()},
      {"high", m.field.high.params().data(), g.high.data(), m.field.high.params().size()},
      {"decoder", m.field.decoder.params().data(), g.decoder.data(), m.field.decoder.params().size()},
      {"ao_decoder", m.field.ao_decoder.params().data(), g.ao_decoder.data(), m.field.ao_decoder.params().size()},
  };
  if (!m.switches.hash_sh) out.push_back({"sh", m.cloud.sh.data(), g.sh.data(), m.cloud.sh.size()});
  return out;
}

// Indices to probe: a few random entries plus, for the sparse hash tables,
// entries whose analytic gradient is nonzero.
inline std::vector<Eigen::Index> probes(const Group& gr, Rng& rng, int count) {
  std::vector<Eigen::Index> idx;
  if (gr.name == "low" || gr.name == "high") {
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < gr.size; ++j)
      if (gr.grad[j] != 0.0) live.push_back(j);
    for (int k = 0; k < count && !live.empty(); ++k) idx.push_back(live[rng.uniform_int(int(live.size()))]);
    return idx;
  }
  for (int k = 0; k < count; ++k) idx.push_back(rng.uniform_int(int(gr.size)));
  return idx;
}

struct Report {
  int checked = 0;
  int skipped = 0;
  double worst = 0.0;
  std::string worst_at;
  std::set<std::string> groups;
  bool finite = true;

  void note(double rel, int scene, const std::string& group, Eigen::Index j) {
    groups.insert(group);
    if (rel > worst) {
      worst = rel;
      std::ostringstream o;
      o << "scene " << scene << " " << group << "[" << j << "]";
      worst_at = o.str();
    }
  }
};

/// Double-precision analytic gradients against central differences with
/// h = 1e-6, three probes per group and scene.
inline Report double_vs_fd(int scenes) {
  Report rep;
  for (int sc = 0; sc < scenes; ++sc) {
    Scene s = make_scene(sc);
    GradientSet<double> g;
    loss_and_gradient(s.model, s.frame, s.target, s.rs, LossConfig{}, &g);
    if (!g.first_non_finite().empty()) rep.finite = false;
    auto loss_at = [&](double* p, double v) {
      const double o = *p;
      *p = v;
      const double l = loss_and_gradient<double>(s.model, s.frame, s.target, s.rs, LossConfig{}, nullptr);
      *p = o;
      return l;
    };
    Rng rng(stream_seed(77, sc));
    for (const auto& gr : groups(s.model, g)) {
      for (const Eigen::Index j : probes(gr, rng, 3)) {
        double* p = gr.param + j;
        const double h = 1e-6, o = *p;
        const double fd = (loss_at(p, o + h) - loss_at(p, o - h)) / (2 * h);
        const double fd2 = (loss_at(p, o + 2 * h) - loss_at(p, o - 2 * h)) / (4 * h);
        // Below the floor the difference quotient is rounding noise of the
        // loss divided by h.
        const double scale = std::max({std::abs(fd), std::abs(gr.grad[j]), 1e-5});
        // Two step sizes disagreeing grossly means the probe straddles a
        // visibility or ordering change where the loss is not differentiable.
        if (std::abs(fd - fd2) > 1e-3 * scale) {
          ++rep.skipped;
          continue;
        }
        ++rep.checked;
        rep.note(std::abs(gr.grad[j] - fd) / scale, sc, gr.name, j);
      }
    }
  }
  return rep;
}

/// Single-precision analytic gradients against the double-precision ones on
/// every entry. Entries below 1% of their group's peak are compared against
/// that floor.
inline Report float_vs_double(int scenes) {
  Report rep;
  for (int sc = 0; sc < scenes; ++sc) {
    Scene s = make_scene(sc);
    GradientSet<double> gd;
    loss_and_gradient(s.model, s.frame, s.target, s.rs, LossConfig{}, &gd);
    const auto mf = s.model.template cast<float>();
    GradientSet<float> gf;
    loss_and_gradient(mf, s.frame, s.target.cast<float>(), s.rs, LossConfig{}, &gf);
    if (!gf.first_non_finite().empty()) rep.finite = false;
    const GradientSet<double> gw = widen(gf);
    auto mm = s.model;
    const auto a = groups(mm, gd), b = groups(mm, gw);
    for (size_t k = 0; k < a.size(); ++k) {
      double peak = 0;
      for (Eigen::Index j = 0; j < a[k].size; ++j) peak = std::max(peak, std::abs(a[k].grad[j]));
      for (Eigen::Index j = 0; j < a[k].size; ++j) {
        ++rep.checked;
        rep.note(std::abs(a[k].grad[j] - b[k].grad[j]) / std::max({std::abs(a[k].grad[j]), 1e-2 * peak, 1e-6}),
                 sc, a[k].name, j);
      }
    }
  }
  return rep;
}

}  // namespace gavatar::gradcheck
