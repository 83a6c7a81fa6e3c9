#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "msggan/multiscale.hpp"

namespace msggan {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormEps = 1e-8;

torch::Tensor leaky_relu(const torch::Tensor& x);

/// Per-pixel channel RMS normalization: a / sqrt(mean_c(a^2) + eps).
torch::Tensor pixnorm(const torch::Tensor& a, double eps = kNormEps);

/// Row-wise hypersphere normalization of a batch x latent_dim matrix.
torch::Tensor normalize_latent(const torch::Tensor& z, double eps = kNormEps);

/// Appends one constant feature map holding the mean (over channels and
/// pixels) of the population standard deviation across the batch.
torch::Tensor minibatch_stddev(const torch::Tensor& a);

// Equalized learning rate: weights are stored as unit-normal draws and
// multiplied by the He constant gain / sqrt(fan_in) at use time. With
// `equalized` false the constant is folded into the initial draw instead.

class EqualizedConv2dImpl : public torch::nn::Module {
 public:
  EqualizedConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel_size,
                      int64_t padding, double gain, bool equalized);

  void reset(at::Generator& gen);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int64_t padding_;
  double he_;
  bool equalized_;
};
TORCH_MODULE(EqualizedConv2d);

class EqualizedLinearImpl : public torch::nn::Module {
 public:
  EqualizedLinearImpl(int64_t in_features, int64_t out_features, double gain, bool equalized);

  void reset(at::Generator& gen);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double he_;
  bool equalized_;
};
TORCH_MODULE(EqualizedLinear);

/// The generator's first layer: a 4x4 transposed convolution applied to the
/// latent vector viewed as a 1x1 map.
class LatentProjectionImpl : public torch::nn::Module {
 public:
  LatentProjectionImpl(int64_t latent_dim, int64_t out_channels, bool equalized);

  void reset(at::Generator& gen);
  torch::Tensor forward(const torch::Tensor& z);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double he_;
  bool equalized_;
};
TORCH_MODULE(LatentProjection);

}  // namespace msggan
