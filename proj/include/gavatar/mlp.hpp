#pragma once

#include "gavatar/types.hpp"

#include <cstdint>
#include <vector>

namespace gavatar {

/// Fully connected network, ReLU on hidden layers, linear output. All
/// weights and biases live in one flat vector so an optimiser can treat the
/// network as a single parameter group. Layer l stores W_l (out x in,
/// row-major) followed by b_l.
template <typename S> class Mlp {
 public:
  using Mat = MatX<S>;
  using WeightMap = Eigen::Map<Mat>;
  using ConstWeightMap = Eigen::Map<const Mat>;

  struct Cache {
    // activations[0] is the input, activations[l] the post-ReLU output of
    // hidden layer l.
    std::vector<Mat> activations;
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int layer_count() const { return static_cast<int>(dims_.size()) - 1; }

  VecX<S>& params() { return params_; }
  const VecX<S>& params() const { return params_; }

  WeightMap weight(int layer);
  ConstWeightMap weight(int layer) const;
  Eigen::Map<VecX<S>> bias(int layer);
  Eigen::Map<const VecX<S>> bias(int layer) const;

  /// He-uniform hidden layers. The output layer is zeroed when
  /// `zero_output` is set so residual heads start at zero.
  void init(std::uint64_t seed, bool zero_output);

  /// Batch forward; rows are samples.
  Mat forward(const Mat& x, Cache* cache = nullptr) const;

  /// Returns dL/dx and accumulates dL/dparams.
  Mat backward(const Cache& cache, const Mat& d_out, VecX<S>& d_params) const;

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  VecX<S> params_;
};

}  // namespace gavatar
