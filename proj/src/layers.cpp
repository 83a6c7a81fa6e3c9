#include "msggan/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace msggan {

// ---- MultiScaleImageSet --------------------------------------------------

MultiScaleImageSet::MultiScaleImageSet(std::map<int64_t, torch::Tensor> images)
    : images_(std::move(images)) {}

void MultiScaleImageSet::set(int64_t resolution, torch::Tensor images) {
  images_[resolution] = std::move(images);
}

const torch::Tensor& MultiScaleImageSet::at(int64_t resolution) const {
  auto it = images_.find(resolution);
  if (it == images_.end()) {
    throw std::invalid_argument("multi-scale image set has no " + std::to_string(resolution) +
                                "x" + std::to_string(resolution) + " entry");
  }
  return it->second;
}

int64_t MultiScaleImageSet::top_resolution() const {
  if (images_.empty()) throw std::invalid_argument("empty multi-scale image set");
  return images_.rbegin()->first;
}

int64_t MultiScaleImageSet::batch_size() const { return top().size(0); }

std::vector<int64_t> MultiScaleImageSet::resolutions() const {
  std::vector<int64_t> out;
  for (const auto& [r, t] : images_) out.push_back(r);
  return out;
}

MultiScaleImageSet MultiScaleImageSet::restricted_to(const std::set<int64_t>& resolutions) const {
  MultiScaleImageSet out;
  for (int64_t r : resolutions) out.set(r, at(r));
  return out;
}

MultiScaleImageSet MultiScaleImageSet::detached() const {
  MultiScaleImageSet out;
  for (const auto& [r, t] : images_) out.set(r, t.detach());
  return out;
}

MultiScaleImageSet MultiScaleImageSet::rows(int64_t begin, int64_t end) const {
  MultiScaleImageSet out;
  for (const auto& [r, t] : images_) out.set(r, t.slice(0, begin, end));
  return out;
}

void MultiScaleImageSet::validate() const {
  if (images_.empty()) throw std::invalid_argument("empty multi-scale image set");
  const int64_t batch = images_.begin()->second.size(0);
  for (const auto& [r, t] : images_) {
    if (t.dim() != 4 || t.size(1) != 3 || t.size(2) != r || t.size(3) != r) {
      throw std::invalid_argument("entry " + std::to_string(r) + " is not batch x 3 x " +
                                  std::to_string(r) + " x " + std::to_string(r));
    }
    if (t.size(0) != batch) {
      throw std::invalid_argument("batch size mismatch between scales (" + std::to_string(batch) +
                                  " vs " + std::to_string(t.size(0)) + " at " + std::to_string(r) +
                                  ")");
    }
  }
}

void record_shape(ShapeTrace* trace, std::string op, const torch::Tensor& t) {
  if (trace == nullptr) return;
  auto sizes = t.sizes().vec();
  sizes.erase(sizes.begin());
  trace->push_back({std::move(op), std::move(sizes)});
}

std::ostream& operator<<(std::ostream& os, const ShapeRow& row) {
  os << row.op << ' ';
  for (size_t i = 0; i < row.shape.size(); ++i) os << (i ? "x" : "") << row.shape[i];
  return os;
}

// ---- layers ----------------------------------------------------------------

torch::Tensor leaky_relu(const torch::Tensor& x) { return torch::leaky_relu(x, kLeakySlope); }

torch::Tensor pixnorm(const torch::Tensor& a, double eps) {
  return a * torch::rsqrt(a.pow(2).mean(1, /*keepdim=*/true) + eps);
}

torch::Tensor normalize_latent(const torch::Tensor& z, double eps) {
  return z * torch::rsqrt(z.pow(2).mean(1, /*keepdim=*/true) + eps);
}

torch::Tensor minibatch_stddev(const torch::Tensor& a) {
  if (a.dim() != 4) throw std::invalid_argument("minibatch_stddev expects batch x C x H x W");
  if (a.size(0) < 1) throw std::invalid_argument("minibatch_stddev needs a non-empty batch");
  auto centered = a - a.mean(0, /*keepdim=*/true);
  auto var = centered.pow(2).mean(0);
  // sqrt has an infinite derivative at 0; substitute 1 there and mask the
  // result back to zero so zero-variance features yield zero with zero slope.
  auto positive = var > 0;
  auto stddev = torch::sqrt(torch::where(positive, var, torch::ones_like(var))) * positive;
  auto feature = stddev.mean().expand({a.size(0), 1, a.size(2), a.size(3)});
  return torch::cat({a, feature}, 1);
}

namespace {

double he_constant(double gain, int64_t fan_in) {
  return gain / std::sqrt(static_cast<double>(fan_in));
}

}  // namespace

EqualizedConv2dImpl::EqualizedConv2dImpl(int64_t in_channels, int64_t out_channels,
                                         int64_t kernel_size, int64_t padding, double gain,
                                         bool equalized)
    : padding_(padding),
      he_(he_constant(gain, in_channels * kernel_size * kernel_size)),
      equalized_(equalized) {
  weight = register_parameter("weight",
                              torch::zeros({out_channels, in_channels, kernel_size, kernel_size}));
  bias = register_parameter("bias", torch::zeros({out_channels}));
}

void EqualizedConv2dImpl::reset(at::Generator& gen) {
  torch::NoGradGuard no_grad;
  weight.normal_(0.0, equalized_ ? 1.0 : he_, gen);
  bias.zero_();
}

torch::Tensor EqualizedConv2dImpl::forward(const torch::Tensor& x) {
  auto w = equalized_ ? weight * he_ : weight;
  return torch::conv2d(x, w, bias, /*stride=*/1, padding_);
}

EqualizedLinearImpl::EqualizedLinearImpl(int64_t in_features, int64_t out_features, double gain,
                                         bool equalized)
    : he_(he_constant(gain, in_features)), equalized_(equalized) {
  weight = register_parameter("weight", torch::zeros({out_features, in_features}));
  bias = register_parameter("bias", torch::zeros({out_features}));
}

void EqualizedLinearImpl::reset(at::Generator& gen) {
  torch::NoGradGuard no_grad;
  weight.normal_(0.0, equalized_ ? 1.0 : he_, gen);
  bias.zero_();
}

torch::Tensor EqualizedLinearImpl::forward(const torch::Tensor& x) {
  auto w = equalized_ ? weight * he_ : weight;
  return torch::addmm(bias, x, w.t());
}

LatentProjectionImpl::LatentProjectionImpl(int64_t latent_dim, int64_t out_channels, bool equalized)
    : he_(he_constant(std::sqrt(2.0), latent_dim * 16)), equalized_(equalized) {
  weight = register_parameter("weight", torch::zeros({latent_dim, out_channels, 4, 4}));
  bias = register_parameter("bias", torch::zeros({out_channels}));
}

void LatentProjectionImpl::reset(at::Generator& gen) {
  torch::NoGradGuard no_grad;
  weight.normal_(0.0, equalized_ ? 1.0 : he_, gen);
  bias.zero_();
}

torch::Tensor LatentProjectionImpl::forward(const torch::Tensor& z) {
  auto w = equalized_ ? weight * he_ : weight;
  return torch::conv_transpose2d(z.view({z.size(0), z.size(1), 1, 1}), w, bias);
}

}  // namespace msggan
