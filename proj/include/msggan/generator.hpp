#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "msggan/arch_spec.hpp"
#include "msggan/layers.hpp"
#include "msggan/multiscale.hpp"

namespace msggan {

/// batch_size rows of i.i.d. standard normal draws, hypersphere-normalized
/// (each row has unit root-mean-square). Throws std::invalid_argument when
/// batch_size < 1.
torch::Tensor sample_latent(int64_t batch_size, int64_t latent_dim, at::Generator& gen);

/// Multi-scale generator. Block 1 maps the latent to 4x4 (4x4 transposed conv,
/// then 3x3 conv); every further block upsamples 2x (nearest) and applies two
/// 3x3 convs. Each conv is followed by LeakyReLU(0.2) and PixNorm, and every
/// block owns a 1x1 to-RGB head whose output is returned for that scale.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ArchitectureSpec& spec, bool equalized_lr = true);

  /// Weights ~ N(0, 1) in registration order, biases zero.
  void reset_parameters(at::Generator& gen);

  /// One image per resolution in the schedule; throws std::invalid_argument
  /// on a latent width mismatch.
  MultiScaleImageSet forward(const torch::Tensor& z, ShapeTrace* trace = nullptr);

  std::vector<torch::Tensor> to_rgb_parameters(int64_t resolution) const;
  const ArchitectureSpec& spec() const { return spec_; }

 private:
  struct Block {
    int64_t resolution = 0;
    LatentProjection dense{nullptr};
    EqualizedConv2d conv1{nullptr};
    EqualizedConv2d conv2{nullptr};
    EqualizedConv2d to_rgb{nullptr};
  };

  ArchitectureSpec spec_;
  std::vector<Block> blocks_;
};
TORCH_MODULE(Generator);

}  // namespace msggan
