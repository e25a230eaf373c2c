#pragma once

#include "gavatar/hash_grid.hpp"
#include "gavatar/mlp.hpp"
#include "gavatar/priors.hpp"
#include "gavatar/sh.hpp"

#include <cstdint>
#include <span>
#include <utility>

namespace gavatar {

struct FieldConfig {
  HashBandConfig low{8, 16, 1.38, 16, 2};
  // Four extra levels ending at resolution 1024.
  HashBandConfig high{4, 256, 1.5874, 16, 2};
  int sh_degree = 3;
  int hidden_width = 64;
  int hidden_layers = 2;
  int ao_hidden_width = 32;
  int ao_hidden_layers = 2;
  int time_frequencies = 4;
  double max_offset = 0.05;
  bool time_in_decoder = true;
  // sigmoid(4) ~ 0.982: AO starts close to the frozen value of 1.
  double ao_init_bias = 4.0;
  double table_init_range = 1e-4;

  int feature_dim() const { return low.output_dim() + high.output_dim(); }
  int time_dim() const { return 2 * time_frequencies; }
  int decoder_input_dim() const {
    return feature_dim() + 4 + 6 + (time_in_decoder ? time_dim() : 0);
  }
  int decoder_output_dim() const { return 3 + 3 * sh_coeff_count(sh_degree); }
  int ao_input_dim() const { return low.output_dim() + time_dim(); }
  void validate() const;
};

/// Ablation switches; every switch on is the full model.
struct FieldSwitches {
  bool hash_sh = true;     // SH from the field (off: per-primitive SH)
  bool hash_vd = true;     // displacement field (off: delta_x = 0)
  bool depth = true;       // depth prior input
  bool normals = true;     // normal prior input
  bool multiscale = true;  // high band (off: low band only)
  bool ao = true;          // ambient occlusion (off: ao = 1)

  bool operator==(const FieldSwitches&) const = default;
};

/// Column layout of the decoder input z = [F, phi_d, phi_n, gamma(t)].
struct DecoderLayout {
  int low = 0, high = 0, depth = 0, normal = 0, time = 0, width = 0;
  int time_dim = 0;
  explicit DecoderLayout(const FieldConfig& c);
};

/// tau * f_high + (1 - tau) * f_low, element-wise.
template <typename S>
void blend_features(std::span<const S> f_high, std::span<const S> f_low, S tau, std::span<S> out);

/// Low/high hash bands plus the (delta_x, SH) decoder and the AO decoder.
template <typename S> class MultiScaleHashField {
 public:
  MultiScaleHashField() = default;
  MultiScaleHashField(const FieldConfig& config, const BoundingBox& box, std::uint64_t seed);

  const FieldConfig& config() const { return config_; }
  const BoundingBox& box() const { return box_; }
  DecoderLayout layout() const { return DecoderLayout(config_); }

  HashGridBand<S> low;
  HashGridBand<S> high;
  Mlp<S> decoder;
  Mlp<S> ao_decoder;

  /// [low(x) || tau * high(x)], i.e. tau * F_h + (1 - tau) * F_l with
  /// F_l = [low || 0] and F_h = [low || high]. The high half is zero when
  /// `multiscale` is off.
  void blended_query(const Vec3<S>& x, S tau, bool multiscale, std::span<S> out) const;

  /// Fills one decoder input row.
  void assemble_input(const Vec3<S>& x0, S tau, const PriorPack& pack, double t_norm,
                      const FieldSwitches& sw, std::span<S> z) const;

  /// (delta_x, SH block) from one decoder input row.
  std::pair<Vec3<S>, VecX<S>> decode_residuals(std::span<const S> z) const;

  /// sigmoid(ao_decoder([low(x0), gamma(t)])); exactly 1 while frozen.
  S query_ao(const Vec3<S>& x0, double t_norm, bool frozen) const;

  template <typename T> MultiScaleHashField<T> cast() const;

  /// Used when bands and decoders are filled in externally (deserialisation).
  void set_config(const FieldConfig& config, const BoundingBox& box) {
    config_ = config;
    box_ = box;
  }

 private:
  FieldConfig config_;
  BoundingBox box_;
};

}  // namespace gavatar
