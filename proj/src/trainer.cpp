#include "gavatar/trainer.hpp"

#include "gavatar/rng.hpp"

#include <cmath>

namespace gavatar {

void TrainConfig::validate() const {
  require(iterations >= 0, ErrorKind::Config, "iterations must be >= 0");
  require(ao_freeze_iters >= 0 && ao_freeze_iters <= iterations, ErrorKind::Config,
          "ao_freeze_iters must be in [0, iterations]");
  for (double r : {lr.position, lr.rotation, lr.scale, lr.opacity, lr.hash, lr.mlp, lr.skeleton,
                   lr.sh})
    require(r > 0.0 && std::isfinite(r), ErrorKind::Config, "learning rates must be > 0");
  require(log_every >= 1 && checkpoint_every >= 1, ErrorKind::Config,
          "log/checkpoint intervals must be >= 1");
  loss.validate();
}

template <typename S>
OptimizerState<S>::OptimizerState(const AvatarModel<S>& m)
    : position(m.cloud.position.size()),
      rotation(m.cloud.rotation.size()),
      scale(m.cloud.scale_raw.size()),
      opacity(m.cloud.opacity_logit.size()),
      sh(m.cloud.sh.size()),
      joints(3 * m.joints.size()),
      low(m.field.low.params().size()),
      high(m.field.high.params().size()),
      decoder(m.field.decoder.params().size()),
      ao_decoder(m.field.ao_decoder.params().size()) {}

template <typename S>
void OptimizerState<S>::step(AvatarModel<S>& m, const GradientSet<S>& g, const TrainConfig& cfg,
                             bool ao_frozen) {
  const auto& lr = cfg.lr;
  const auto& a = cfg.adam;
  auto& c = m.cloud;
  position.step(c.position.data(), g.position.data(), c.position.size(), lr.position, a);
  rotation.step(c.rotation.data(), g.rotation.data(), c.rotation.size(), lr.rotation, a);
  scale.step(c.scale_raw.data(), g.scale_raw.data(), c.scale_raw.size(), lr.scale, a);
  opacity.step(c.opacity_logit.data(), g.opacity_logit.data(), c.opacity_logit.size(), lr.opacity,
               a);
  sh.step(c.sh.data(), g.sh.data(), c.sh.size(), lr.sh, a);
  if (m.optimize_joints && !m.joints.empty())
    joints.step(m.joints[0].data(), g.joints[0].data(), 3 * m.joints.size(), lr.skeleton, a);
  low.step(m.field.low.params().data(), g.low.data(), g.low.size(), lr.hash, a);
  high.step(m.field.high.params().data(), g.high.data(), g.high.size(), lr.hash, a);
  decoder.step(m.field.decoder.params().data(), g.decoder.data(), g.decoder.size(), lr.mlp, a);
  if (!ao_frozen)
    ao_decoder.step(m.field.ao_decoder.params().data(), g.ao_decoder.data(), g.ao_decoder.size(),
                    lr.mlp, a);
}

template <typename S>
double loss_and_gradient(const AvatarModel<S>& model, const FrameInput& frame,
                         const Image<S>& target, const RenderSettings& settings,
                         const LossConfig& loss, GradientSet<S>* grad, Image<S>* rendered) {
  AvatarCache<S> cache;
  Image<S> img = render_avatar<S>(model, frame, settings, &cache);
  double value;
  if (grad) {
    Image<S> d_img;
    value = total_loss_grad<S>(img, target, loss, d_img);
    *grad = avatar_backward<S>(model, frame, settings, cache, d_img);
  } else {
    value = total_loss<S>(img, target, loss);
  }
  if (rendered) *rendered = std::move(img);
  return value;
}

template <typename S>
TrainResult train(AvatarModel<S>& model, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg, const CheckpointFn<S>& on_checkpoint) {
  cfg.validate();
  model.validate();
  require(!data.empty(), ErrorKind::Validation, "training set is empty");
  model.optimize_joints = cfg.optimize_joints;

  std::vector<Image<S>> targets;
  targets.reserve(data.size());
  for (const auto& d : data) targets.push_back(d.target.template cast<S>());

  OptimizerState<S> opt(model);
  AvatarModel<S> last_good = model;
  TrainResult result;
  Rng rng(stream_seed(cfg.seed, 0x7a11));

  for (int it = 0; it < cfg.iterations; ++it) {
    const int k = rng.uniform_int(static_cast<int>(data.size()));
    FrameInput frame = data[k].frame;
    frame.ao_frozen = it < cfg.ao_freeze_iters;
    GradientSet<S> g;
    Image<S> img;
    const double loss =
        loss_and_gradient<S>(model, frame, targets[k], cfg.render, cfg.loss, &g, &img);
    std::string bad = std::isfinite(loss) ? g.first_non_finite() : std::string("loss");
    if (!bad.empty()) {
      result.diverged = true;
      result.divergence_reason = "non-finite " + bad + " at iteration " + std::to_string(it);
      model = last_good;
      return result;
    }
    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations)
      result.curve.push_back({it, loss, psnr<S>(img, targets[k]), frame.ao_frozen});
    opt.step(model, g, cfg, frame.ao_frozen);
    if ((it + 1) % cfg.checkpoint_every == 0 || it + 1 == cfg.iterations) {
      last_good = model;
      result.last_good_iteration = it + 1;
      if (on_checkpoint) on_checkpoint(it + 1, model);
    }
  }
  return result;
}

template <typename S>
std::vector<EvalRow> evaluate(const AvatarModel<S>& model, const std::vector<TrainSample>& data,
                              const RenderSettings& settings, const LossConfig& loss) {
  std::vector<EvalRow> rows;
  for (size_t i = 0; i < data.size(); ++i) {
    FrameInput frame = data[i].frame;
    frame.ao_frozen = false;
    const Image<float> img = render_avatar<S>(model, frame, settings).template cast<float>();
    rows.push_back({static_cast<int>(i), psnr<float>(img, data[i].target),
                    ssim<float>(img, data[i].target, loss)});
  }
  return rows;
}

#define GAVATAR_INSTANTIATE_TRAINER(S)                                                        \
  template struct OptimizerState<S>;                                                          \
  template double loss_and_gradient<S>(const AvatarModel<S>&, const FrameInput&,              \
                                       const Image<S>&, const RenderSettings&,                \
                                       const LossConfig&, GradientSet<S>*, Image<S>*);        \
  template TrainResult train<S>(AvatarModel<S>&, const std::vector<TrainSample>&,             \
                                const TrainConfig&, const CheckpointFn<S>&);                  \
  template std::vector<EvalRow> evaluate<S>(const AvatarModel<S>&,                            \
                                            const std::vector<TrainSample>&,                  \
                                            const RenderSettings&, const LossConfig&);

GAVATAR_INSTANTIATE_TRAINER(float)
GAVATAR_INSTANTIATE_TRAINER(double)

}  // namespace gavatar
