#pragma once

#include "gavatar/image.hpp"

namespace gavatar {

inline constexpr double kPsnrCap = 99.0;

struct LossConfig {
  double lambda = 0.2;
  int window = 11;
  double window_sigma = 1.5;
  double dynamic_range = 1.0;
  void validate() const;
};

template <typename S> double l1_loss(const Image<S>& a, const Image<S>& b);

/// Mean SSIM over every position where the full window fits (valid
/// filtering, no padding). Channels are averaged.
template <typename S> double ssim(const Image<S>& a, const Image<S>& b, const LossConfig& cfg = {});

template <typename S>
double dssim_loss(const Image<S>& a, const Image<S>& b, const LossConfig& cfg = {}) {
  return 0.5 * (1.0 - ssim(a, b, cfg));
}

template <typename S> double total_loss(const Image<S>& a, const Image<S>& b, const LossConfig& cfg = {});

/// Mean squared error; PSNR is capped when it is zero.
template <typename S> double mse(const Image<S>& a, const Image<S>& b);
template <typename S> double psnr(const Image<S>& a, const Image<S>& b, double cap = kPsnrCap);

/// total_loss and its gradient with respect to `rendered`.
template <typename S>
double total_loss_grad(const Image<S>& rendered, const Image<S>& target, const LossConfig& cfg,
                       Image<S>& d_rendered);

/// Gradient of mean SSIM with respect to `a`, accumulated times `scale`.
template <typename S>
double ssim_grad(const Image<S>& a, const Image<S>& b, const LossConfig& cfg, double scale,
                 Image<S>& d_a);

}  // namespace gavatar
