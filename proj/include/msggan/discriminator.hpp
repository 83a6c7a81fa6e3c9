#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "msggan/arch_spec.hpp"
#include "msggan/layers.hpp"
#include "msggan/multiscale.hpp"

namespace msggan {

/// Merges an incoming image with the straight-path activations of a block.
///   simple  : [rgb; a]
///   lin_cat : [conv1x1(rgb); a], projection width = half the path width
///   cat_lin : conv1x1([rgb; a]) back to the path width
class CombineImpl : public torch::nn::Module {
 public:
  CombineImpl(CombineKind kind, int64_t path_channels, bool equalized_lr = true);

  void reset(at::Generator& gen);
  /// Throws std::invalid_argument when batch or spatial sizes differ.
  torch::Tensor forward(const torch::Tensor& rgb, const torch::Tensor& a);

  CombineKind kind() const { return kind_; }
  int64_t output_channels() const { return output_channels_; }

 private:
  CombineKind kind_;
  int64_t output_channels_;
  EqualizedConv2d projection_{nullptr};
};
TORCH_MODULE(Combine);

/// Single critic over the whole multi-scale set. The top image enters via a
/// 1x1 from-RGB conv; each block then merges its scale's image (when
/// connected), applies MinBatchStdDev, two convs with LeakyReLU and a 2x2
/// average pool. The 4x4 block ends with a 4x4 valid conv and a linear layer
/// producing one unbounded score per sample.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ArchitectureSpec& spec, bool equalized_lr = true);

  void reset_parameters(at::Generator& gen);

  /// `images` must contain every resolution in the connection mask; other
  /// entries are ignored. Returns a length-batch score vector.
  torch::Tensor forward(const MultiScaleImageSet& images, ShapeTrace* trace = nullptr);

  const ArchitectureSpec& spec() const { return spec_; }

 private:
  struct Block {
    DiscBlockChannels channels;
    EqualizedConv2d from_rgb{nullptr};
    Combine combine{nullptr};
    EqualizedConv2d conv1{nullptr};
    EqualizedConv2d conv2{nullptr};
    EqualizedLinear critic{nullptr};
  };

  void check_inputs(const MultiScaleImageSet& images) const;

  ArchitectureSpec spec_;
  std::vector<Block> blocks_;
};
TORCH_MODULE(Discriminator);

}  // namespace msggan
