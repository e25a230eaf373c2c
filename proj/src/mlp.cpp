#include "gavatar/mlp.hpp"

#include "gavatar/rng.hpp"

#include <cmath>

namespace gavatar {

template <typename S> Mlp<S>::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  require(dims_.size() >= 2, ErrorKind::Config, "MLP needs at least input and output widths");
  std::size_t off = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims_.size()); ++l) {
    require(dims_[l] >= 1 && dims_[l + 1] >= 1, ErrorKind::Config, "MLP widths must be >= 1");
    offsets_.push_back(off);
    off += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
  }
  params_ = VecX<S>::Zero(static_cast<Eigen::Index>(off));
}

template <typename S> typename Mlp<S>::WeightMap Mlp<S>::weight(int l) {
  return WeightMap(params_.data() + offsets_[l], dims_[l + 1], dims_[l]);
}
template <typename S> typename Mlp<S>::ConstWeightMap Mlp<S>::weight(int l) const {
  return ConstWeightMap(params_.data() + offsets_[l], dims_[l + 1], dims_[l]);
}
template <typename S> Eigen::Map<VecX<S>> Mlp<S>::bias(int l) {
  return Eigen::Map<VecX<S>>(params_.data() + offsets_[l] + dims_[l] * dims_[l + 1],
                             dims_[l + 1]);
}
template <typename S> Eigen::Map<const VecX<S>> Mlp<S>::bias(int l) const {
  return Eigen::Map<const VecX<S>>(params_.data() + offsets_[l] + dims_[l] * dims_[l + 1],
                                   dims_[l + 1]);
}

template <typename S> void Mlp<S>::init(std::uint64_t seed, bool zero_output) {
  Rng rng(seed);
  params_.setZero();
  for (int l = 0; l < layer_count(); ++l) {
    if (zero_output && l == layer_count() - 1) break;
    const double bound = std::sqrt(6.0 / dims_[l]);
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = S(rng.uniform(-bound, bound));
  }
}

template <typename S> typename Mlp<S>::Mat Mlp<S>::forward(const Mat& x, Cache* cache) const {
  require(x.cols() == input_dim(), ErrorKind::Shape,
          "MLP input width " + std::to_string(x.cols()) + " != " + std::to_string(input_dim()));
  if (cache) cache->activations.assign(1, x);
  Mat a = x;
  for (int l = 0; l < layer_count(); ++l) {
    Mat z = a * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    if (l + 1 < layer_count()) {
      z = z.cwiseMax(S(0));
      if (cache) cache->activations.push_back(z);
    }
    a = std::move(z);
  }
  return a;
}

template <typename S>
typename Mlp<S>::Mat Mlp<S>::backward(const Cache& cache, const Mat& d_out,
                                      VecX<S>& d_params) const {
  require(d_out.cols() == output_dim(), ErrorKind::Shape, "MLP output gradient width mismatch");
  Mat g = d_out;
  for (int l = layer_count() - 1; l >= 0; --l) {
    const Mat& a = cache.activations[l];
    Eigen::Map<Mat> dw(d_params.data() + offsets_[l], dims_[l + 1], dims_[l]);
    Eigen::Map<VecX<S>> db(d_params.data() + offsets_[l] + dims_[l] * dims_[l + 1],
                           dims_[l + 1]);
    dw.noalias() += g.transpose() * a;
    db += g.colwise().sum().transpose();
    Mat prev = g * weight(l);
    if (l > 0) prev = prev.cwiseProduct((a.array() > S(0)).template cast<S>().matrix());
    g = std::move(prev);
  }
  return g;
}

template class Mlp<float>;
template class Mlp<double>;

}  // namespace gavatar
