#include "msggan/discriminator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace msggan {

CombineImpl::CombineImpl(CombineKind kind, int64_t path_channels, bool equalized_lr)
    : kind_(kind) {
  switch (kind_) {
    case CombineKind::simple:
      output_channels_ = path_channels + 3;
      break;
    case CombineKind::lin_cat: {
      const int64_t half = std::max<int64_t>(1, path_channels / 2);
      projection_ = register_module("projection", EqualizedConv2d(3, half, 1, 0, 1.0, equalized_lr));
      output_channels_ = path_channels + half;
      break;
    }
    case CombineKind::cat_lin:
      projection_ = register_module(
          "projection", EqualizedConv2d(path_channels + 3, path_channels, 1, 0, 1.0, equalized_lr));
      output_channels_ = path_channels;
      break;
  }
}

void CombineImpl::reset(at::Generator& gen) {
  if (projection_) projection_->reset(gen);
}

torch::Tensor CombineImpl::forward(const torch::Tensor& rgb, const torch::Tensor& a) {
  if (rgb.dim() != 4 || a.dim() != 4 || rgb.size(0) != a.size(0) || rgb.size(2) != a.size(2) ||
      rgb.size(3) != a.size(3)) {
    throw std::invalid_argument("combine: image " + std::to_string(rgb.size(-1)) +
                                " and activation " + std::to_string(a.size(-1)) +
                                " differ in batch or spatial size");
  }
  switch (kind_) {
    case CombineKind::simple:
      return torch::cat({rgb, a}, 1);
    case CombineKind::lin_cat:
      return torch::cat({projection_->forward(rgb), a}, 1);
    case CombineKind::cat_lin:
      return projection_->forward(torch::cat({rgb, a}, 1));
  }
  throw std::logic_error("unknown combine kind");
}

DiscriminatorImpl::DiscriminatorImpl(const ArchitectureSpec& spec, bool equalized_lr)
    : spec_(spec) {
  const double relu_gain = std::sqrt(2.0);
  for (const auto& ch : spec_.disc_channels) {
    Block b;
    b.channels = ch;
    const std::string name = "block" + std::to_string(ch.resolution);
    if (ch.is_top) {
      b.from_rgb = register_module("from_rgb",
                                   EqualizedConv2d(3, ch.path_channels, 1, 0, relu_gain, equalized_lr));
    }
    if (ch.merges_image) {
      b.combine = register_module("combine" + std::to_string(ch.resolution),
                                  Combine(spec_.combine_kind, ch.path_channels, equalized_lr));
    }
    b.conv1 = register_module(name + "_conv1", EqualizedConv2d(ch.conv1_in(), ch.conv1_out, 3, 1,
                                                               relu_gain, equalized_lr));
    if (ch.is_final) {
      b.conv2 = register_module(name + "_conv2", EqualizedConv2d(ch.conv1_out, ch.conv2_out, 4, 0,
                                                                 relu_gain, equalized_lr));
      b.critic = register_module("critic", EqualizedLinear(ch.conv2_out, 1, 1.0, equalized_lr));
    } else {
      b.conv2 = register_module(name + "_conv2", EqualizedConv2d(ch.conv1_out, ch.conv2_out, 3, 1,
                                                                 relu_gain, equalized_lr));
    }
    blocks_.push_back(b);
  }
}

void DiscriminatorImpl::reset_parameters(at::Generator& gen) {
  for (auto& b : blocks_) {
    if (b.from_rgb) b.from_rgb->reset(gen);
    if (b.combine) b.combine->reset(gen);
    b.conv1->reset(gen);
    b.conv2->reset(gen);
    if (b.critic) b.critic->reset(gen);
  }
}

void DiscriminatorImpl::check_inputs(const MultiScaleImageSet& images) const {
  int64_t batch = -1;
  for (int64_t r : spec_.connection_mask) {
    if (!images.contains(r)) {
      throw std::invalid_argument("discriminator input is missing the " + std::to_string(r) + "x" +
                                  std::to_string(r) + " scale");
    }
    const auto& t = images.at(r);
    if (t.dim() != 4 || t.size(1) != 3 || t.size(2) != r || t.size(3) != r) {
      throw std::invalid_argument("discriminator input at scale " + std::to_string(r) +
                                  " is not batch x 3 x r x r");
    }
    if (batch >= 0 && t.size(0) != batch) {
      throw std::invalid_argument("discriminator inputs disagree on batch size");
    }
    batch = t.size(0);
  }
}

torch::Tensor DiscriminatorImpl::forward(const MultiScaleImageSet& images, ShapeTrace* trace) {
  check_inputs(images);
  torch::Tensor x;
  for (auto& b : blocks_) {
    const int64_t r = b.channels.resolution;
    if (b.channels.is_top) {
      const auto& rgb = images.at(r);
      record_shape(trace, "raw_rgb", rgb);
      x = b.from_rgb->forward(rgb);
      record_shape(trace, "from_rgb", x);
    } else if (b.channels.merges_image) {
      const auto& rgb = images.at(r);
      record_shape(trace, "raw_rgb", rgb);
      x = b.combine->forward(rgb, x);
      record_shape(trace, "combine", x);
    }
    x = minibatch_stddev(x);
    record_shape(trace, "minbatch_std", x);
    x = msggan::leaky_relu(b.conv1->forward(x));
    record_shape(trace, "conv3x3", x);
    x = msggan::leaky_relu(b.conv2->forward(x));
    if (b.channels.is_final) {
      record_shape(trace, "conv4x4", x);
      x = b.critic->forward(x.flatten(1));
      record_shape(trace, "fc", x.view({x.size(0), 1, 1, 1}));
    } else {
      record_shape(trace, "conv3x3", x);
      x = torch::avg_pool2d(x, 2);
      record_shape(trace, "avgpool", x);
    }
  }
  return x.view({-1});
}

}  // namespace msggan
