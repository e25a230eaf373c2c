#include "gavatar/field.hpp"

#include "gavatar/gaussian.hpp"
#include "gavatar/rng.hpp"

#include <cmath>

namespace gavatar {

void FieldConfig::validate() const {
  low.validate();
  high.validate();
  require(low.levels >= 1, ErrorKind::Config, "low band needs at least one level");
  require(sh_degree >= 0 && sh_degree <= kMaxShDegree, ErrorKind::Config,
          "SH degree must be in [0, 3]");
  require(hidden_width >= 1 && hidden_layers >= 0, ErrorKind::Config, "bad decoder shape");
  require(ao_hidden_width >= 1 && ao_hidden_layers >= 0, ErrorKind::Config, "bad AO shape");
  require(time_frequencies >= 0, ErrorKind::Config, "time frequencies must be >= 0");
  require(max_offset > 0.0, ErrorKind::Config, "max offset must be > 0");
}

DecoderLayout::DecoderLayout(const FieldConfig& c) {
  low = 0;
  high = c.low.output_dim();
  depth = high + c.high.output_dim();
  normal = depth + 4;
  time = normal + 6;
  time_dim = c.time_in_decoder ? c.time_dim() : 0;
  width = time + time_dim;
}

template <typename S>
void blend_features(std::span<const S> f_high, std::span<const S> f_low, S tau, std::span<S> out) {
  require(f_high.size() == f_low.size() && out.size() == f_low.size(), ErrorKind::Shape,
          "feature widths differ");
  for (size_t k = 0; k < out.size(); ++k) out[k] = tau * f_high[k] + (S(1) - tau) * f_low[k];
}

namespace {
std::vector<int> mlp_dims(int in, int width, int layers, int out) {
  std::vector<int> d{in};
  for (int l = 0; l < layers; ++l) d.push_back(width);
  d.push_back(out);
  return d;
}
}  // namespace

template <typename S>
MultiScaleHashField<S>::MultiScaleHashField(const FieldConfig& config, const BoundingBox& box,
                                            std::uint64_t seed)
    : low(config.low, box),
      high(config.high, box),
      decoder(mlp_dims(config.decoder_input_dim(), config.hidden_width, config.hidden_layers,
                       config.decoder_output_dim())),
      ao_decoder(mlp_dims(config.ao_input_dim(), config.ao_hidden_width, config.ao_hidden_layers, 1)),
      config_(config),
      box_(box) {
  config.validate();
  Rng rng(stream_seed(seed, 1));
  const double r = config.table_init_range;
  for (Eigen::Index i = 0; i < low.params().size(); ++i) low.params()[i] = S(rng.uniform(-r, r));
  for (Eigen::Index i = 0; i < high.params().size(); ++i) high.params()[i] = S(rng.uniform(-r, r));
  decoder.init(stream_seed(seed, 2), /*zero_output=*/true);
  ao_decoder.init(stream_seed(seed, 3), /*zero_output=*/true);
  ao_decoder.bias(ao_decoder.layer_count() - 1)[0] = S(config.ao_init_bias);
}

template <typename S>
void MultiScaleHashField<S>::blended_query(const Vec3<S>& x, S tau, bool multiscale,
                                           std::span<S> out) const {
  const int nl = low.output_dim();
  const int nh = high.output_dim();
  low.query(x, out.subspan(0, nl));
  auto hi = out.subspan(nl, nh);
  if (!multiscale || nh == 0) {
    for (auto& v : hi) v = S(0);
    return;
  }
  high.query(x, hi);
  for (auto& v : hi) v *= tau;
}

template <typename S>
void MultiScaleHashField<S>::assemble_input(const Vec3<S>& x0, S tau, const PriorPack& pack,
                                            double t_norm, const FieldSwitches& sw,
                                            std::span<S> z) const {
  const DecoderLayout lay(config_);
  require(static_cast<int>(z.size()) == lay.width, ErrorKind::Shape, "decoder row width mismatch");
  blended_query(x0, tau, sw.multiscale, z.subspan(0, lay.depth));
  if (sw.depth) {
    for (int v = 0; v < 4; ++v) sample_prior_map<S>(pack.depth[v], x0, &z[lay.depth + v]);
  } else {
    for (int v = 0; v < 4; ++v) z[lay.depth + v] = S(0);
  }
  if (sw.normals) {
    sample_prior_map<S>(pack.normal[0], x0, &z[lay.normal]);
    sample_prior_map<S>(pack.normal[1], x0, &z[lay.normal + 3]);
  } else {
    for (int k = 0; k < 6; ++k) z[lay.normal + k] = S(0);
  }
  if (lay.time_dim > 0) temporal_encoding<S>(t_norm, config_.time_frequencies, &z[lay.time]);
}

template <typename S>
std::pair<Vec3<S>, VecX<S>> MultiScaleHashField<S>::decode_residuals(std::span<const S> z) const {
  require(static_cast<int>(z.size()) == decoder.input_dim(), ErrorKind::Shape,
          "decoder input has width " + std::to_string(z.size()) + ", expected " +
              std::to_string(decoder.input_dim()));
  MatX<S> row(1, z.size());
  for (size_t k = 0; k < z.size(); ++k) row(0, k) = z[k];
  const MatX<S> out = decoder.forward(row);
  Vec3<S> dx;
  for (int k = 0; k < 3; ++k) dx[k] = S(config_.max_offset) * std::tanh(out(0, k));
  VecX<S> sh(out.cols() - 3);
  for (Eigen::Index k = 0; k < sh.size(); ++k) sh[k] = out(0, 3 + k);
  return {dx, sh};
}

template <typename S>
S MultiScaleHashField<S>::query_ao(const Vec3<S>& x0, double t_norm, bool frozen) const {
  if (frozen) return S(1);
  const int nl = low.output_dim();
  MatX<S> row(1, config_.ao_input_dim());
  low.query(x0, std::span<S>(row.data(), nl));
  temporal_encoding<S>(t_norm, config_.time_frequencies, row.data() + nl);
  return sigmoid(ao_decoder.forward(row)(0, 0));
}

template <typename S>
template <typename T>
MultiScaleHashField<T> MultiScaleHashField<S>::cast() const {
  MultiScaleHashField<T> f;
  f.low = HashGridBand<T>(config_.low, box_);
  f.high = HashGridBand<T>(config_.high, box_);
  f.low.params() = low.params().template cast<T>();
  f.high.params() = high.params().template cast<T>();
  f.decoder = Mlp<T>(decoder.dims());
  f.decoder.params() = decoder.params().template cast<T>();
  f.ao_decoder = Mlp<T>(ao_decoder.dims());
  f.ao_decoder.params() = ao_decoder.params().template cast<T>();
  f.set_config(config_, box_);
  return f;
}

template class MultiScaleHashField<float>;
template class MultiScaleHashField<double>;
template MultiScaleHashField<double> MultiScaleHashField<float>::cast<double>() const;
template MultiScaleHashField<float> MultiScaleHashField<double>::cast<float>() const;
template MultiScaleHashField<float> MultiScaleHashField<float>::cast<float>() const;
template MultiScaleHashField<double> MultiScaleHashField<double>::cast<double>() const;

template void blend_features<float>(std::span<const float>, std::span<const float>, float,
                                    std::span<float>);
template void blend_features<double>(std::span<const double>, std::span<const double>, double,
                                     std::span<double>);

}  // namespace gavatar
