#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <map>

#include "msggan/multiscale.hpp"

namespace msggan {

/// Anything mapping a multi-scale batch to one score per sample.
using Critic = std::function<torch::Tensor(const MultiScaleImageSet&)>;

struct LossReport {
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double penalty = 0.0;  // mean of per_scale_penalties
  std::map<int64_t, double> per_scale_penalties;
};

/// Differentiable pieces of a discriminator objective plus their values.
struct DiscriminatorLoss {
  torch::Tensor total;
  torch::Tensor penalty;
  LossReport report;
};

/// Per-scale mean-over-batch penalties of a critic at `inputs`. The gradient
/// of sum(critic(inputs)) is taken w.r.t. every scale; scales the critic does
/// not depend on contribute a zero gradient. `per_sample` receives one
/// scale's gradient flattened to batch x n and returns the per-sample
/// penalty vector that is averaged over the batch.
struct ScalePenalty {
  torch::Tensor mean;  // scalar, mean over scales
  std::map<int64_t, torch::Tensor> per_scale;
};
ScalePenalty multi_scale_gradient_penalty(
    const Critic& critic, const MultiScaleImageSet& inputs,
    const std::function<torch::Tensor(const torch::Tensor&)>& per_sample, bool create_graph = true);

struct WganGpOptions {
  double lambda = 10.0;
  double drift = 0.001;
  /// Draw an independent interpolation weight per scale instead of sharing
  /// one per sample across all scales.
  bool per_scale_alpha = false;
};

/// mean(D(fake)) - mean(D(real)) + lambda * GP + drift * mean(D(real)^2), with
/// GP the average over scales of mean_batch (||grad_{x_hat_i} D|| - 1)^2 at
/// interpolates x_hat_i = alpha * real_i + (1 - alpha) * fake_i.
DiscriminatorLoss wgan_gp_disc_loss(const Critic& critic, const MultiScaleImageSet& real,
                                    const MultiScaleImageSet& fake, const WganGpOptions& options,
                                    at::Generator& gen);

/// -mean(D(fake)).
torch::Tensor wgan_gen_loss(const Critic& critic, const MultiScaleImageSet& fake);

enum class RealPenalty {
  zero_centered,  // (gamma / 2) * ||grad||^2 on real samples
  one_sided,      // (gamma / 2) * max(0, ||grad|| - 1)^2 on real samples
};

struct NonSatOptions {
  double gamma = 10.0;
  RealPenalty real_penalty = RealPenalty::zero_centered;
};

/// mean(softplus(-D(real))) + mean(softplus(D(fake))) + real-side penalty.
DiscriminatorLoss nonsat_disc_loss(const Critic& critic, const MultiScaleImageSet& real,
                                   const MultiScaleImageSet& fake, const NonSatOptions& options);

/// mean(softplus(-D(fake))).
torch::Tensor nonsat_gen_loss(const Critic& critic, const MultiScaleImageSet& fake);

/// Both non-saturating objectives on one (real, fake) pair.
LossReport nonsat_gp_losses(const Critic& critic, const MultiScaleImageSet& real,
                            const MultiScaleImageSet& fake, const NonSatOptions& options);

}  // namespace msggan
