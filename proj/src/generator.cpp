#include "msggan/generator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace msggan {

torch::Tensor sample_latent(int64_t batch_size, int64_t latent_dim, at::Generator& gen) {
  if (batch_size < 1) throw std::invalid_argument("sample_latent: batch_size must be >= 1");
  if (latent_dim < 1) throw std::invalid_argument("sample_latent: latent_dim must be >= 1");
  return normalize_latent(torch::randn({batch_size, latent_dim}, gen));
}

GeneratorImpl::GeneratorImpl(const ArchitectureSpec& spec, bool equalized_lr) : spec_(spec) {
  const double relu_gain = std::sqrt(2.0);
  for (const auto& ch : spec_.gen_channels) {
    Block b;
    b.resolution = ch.resolution;
    const std::string name = "block" + std::to_string(ch.resolution);
    if (ch.resolution == 4) {
      b.dense = register_module(name + "_dense",
                                LatentProjection(ch.in_channels, ch.out_channels, equalized_lr));
      b.conv2 = register_module(name + "_conv",
                                EqualizedConv2d(ch.out_channels, ch.out_channels, 3, 1, relu_gain,
                                                equalized_lr));
    } else {
      b.conv1 = register_module(name + "_conv1",
                                EqualizedConv2d(ch.in_channels, ch.out_channels, 3, 1, relu_gain,
                                                equalized_lr));
      b.conv2 = register_module(name + "_conv2",
                                EqualizedConv2d(ch.out_channels, ch.out_channels, 3, 1, relu_gain,
                                                equalized_lr));
    }
    b.to_rgb = register_module("to_rgb" + std::to_string(ch.resolution),
                               EqualizedConv2d(ch.out_channels, 3, 1, 0, 1.0, equalized_lr));
    blocks_.push_back(b);
  }
}

void GeneratorImpl::reset_parameters(at::Generator& gen) {
  for (auto& b : blocks_) {
    if (b.dense) b.dense->reset(gen);
    if (b.conv1) b.conv1->reset(gen);
    b.conv2->reset(gen);
    b.to_rgb->reset(gen);
  }
}

MultiScaleImageSet GeneratorImpl::forward(const torch::Tensor& z, ShapeTrace* trace) {
  if (z.dim() != 2 || z.size(1) != spec_.latent_dim) {
    throw std::invalid_argument("generator expects batch x " + std::to_string(spec_.latent_dim) +
                                " latents");
  }
  MultiScaleImageSet out;
  auto x = normalize_latent(z);
  record_shape(trace, "latent", x.view({x.size(0), x.size(1), 1, 1}));
  for (auto& b : blocks_) {
    if (b.dense) {
      x = pixnorm(msggan::leaky_relu(b.dense->forward(x)));
      record_shape(trace, "conv4x4", x);
    } else {
      x = torch::upsample_nearest2d(x, {b.resolution, b.resolution});
      record_shape(trace, "upsample", x);
      x = pixnorm(msggan::leaky_relu(b.conv1->forward(x)));
      record_shape(trace, "conv3x3", x);
    }
    x = pixnorm(msggan::leaky_relu(b.conv2->forward(x)));
    record_shape(trace, "conv3x3", x);
    auto rgb = b.to_rgb->forward(x);
    record_shape(trace, "to_rgb", rgb);
    out.set(b.resolution, rgb);
  }
  return out;
}

std::vector<torch::Tensor> GeneratorImpl::to_rgb_parameters(int64_t resolution) const {
  for (const auto& b : blocks_) {
    if (b.resolution == resolution) return {b.to_rgb->weight, b.to_rgb->bias};
  }
  throw std::invalid_argument("no to-RGB head at resolution " + std::to_string(resolution));
}

}  // namespace msggan
