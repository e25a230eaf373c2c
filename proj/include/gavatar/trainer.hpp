#pragma once

#include "gavatar/adam.hpp"
#include "gavatar/avatar.hpp"
#include "gavatar/metrics.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gavatar {

struct LearningRates {
  double position = 1.6e-4;
  double rotation = 1e-3;
  double scale = 5e-3;
  double opacity = 5e-2;
  double hash = 1e-2;
  double mlp = 1e-3;
  double skeleton = 1e-5;
  double sh = 2.5e-3;  // per-primitive SH, used when the field's SH is off
};

struct TrainConfig {
  int iterations = 2000;
  int ao_freeze_iters = 300;
  std::uint64_t seed = 0;
  LearningRates lr;
  AdamConfig adam;
  LossConfig loss;
  RenderSettings render;
  bool optimize_joints = true;
  int log_every = 50;
  int checkpoint_every = 500;

  void validate() const;
};

struct TrainSample {
  FrameInput frame;
  Image<float> target;
};

struct LossRecord {
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;
  bool ao_frozen = false;
};

struct TrainResult {
  std::vector<LossRecord> curve;
  bool diverged = false;
  int last_good_iteration = 0;
  std::string divergence_reason;
};

struct EvalRow {
  int index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Adam moments for every parameter group of a model.
template <typename S> struct OptimizerState {
  AdamState<S> position, rotation, scale, opacity, sh, joints, low, high, decoder, ao_decoder;
  explicit OptimizerState(const AvatarModel<S>& m);
  void step(AvatarModel<S>& m, const GradientSet<S>& g, const TrainConfig& cfg, bool ao_frozen);
};

/// Called every `checkpoint_every` iterations with the current model.
template <typename S> using CheckpointFn = std::function<void(int, const AvatarModel<S>&)>;

/// Fits the model in place. On a non-finite loss or gradient the model is
/// restored to the last good checkpoint and `diverged` is set.
template <typename S>
TrainResult train(AvatarModel<S>& model, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg, const CheckpointFn<S>& on_checkpoint = {});

template <typename S>
std::vector<EvalRow> evaluate(const AvatarModel<S>& model, const std::vector<TrainSample>& data,
                              const RenderSettings& settings, const LossConfig& loss = {});

/// One loss + gradient evaluation, shared by training and the gradient checks.
template <typename S>
double loss_and_gradient(const AvatarModel<S>& model, const FrameInput& frame,
                         const Image<S>& target, const RenderSettings& settings,
                         const LossConfig& loss, GradientSet<S>* grad, Image<S>* rendered = nullptr);

}  // namespace gavatar
