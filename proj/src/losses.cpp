#include "msggan/losses.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace msggan {

namespace {

void check_aligned(const MultiScaleImageSet& real, const MultiScaleImageSet& fake) {
  real.validate();
  fake.validate();
  if (real.resolutions() != fake.resolutions()) {
    throw std::invalid_argument("real and fake multi-scale sets cover different scales");
  }
  if (real.batch_size() != fake.batch_size()) {
    throw std::invalid_argument("real and fake batches differ in size (" +
                                std::to_string(real.batch_size()) + " vs " +
                                std::to_string(fake.batch_size()) + ")");
  }
}

LossReport penalty_report(const ScalePenalty& p) {
  LossReport report;
  for (const auto& [r, v] : p.per_scale) report.per_scale_penalties[r] = v.item<double>();
  double sum = 0.0;
  for (const auto& [r, v] : report.per_scale_penalties) sum += v;
  report.penalty = sum / static_cast<double>(report.per_scale_penalties.size());
  return report;
}

}  // namespace

ScalePenalty multi_scale_gradient_penalty(
    const Critic& critic, const MultiScaleImageSet& inputs,
    const std::function<torch::Tensor(const torch::Tensor&)>& per_sample, bool create_graph) {
  inputs.validate();
  MultiScaleImageSet leaves;
  std::vector<torch::Tensor> leaf_list;
  for (const auto& [r, t] : inputs) {
    auto leaf = t.detach().requires_grad_(true);
    leaves.set(r, leaf);
    leaf_list.push_back(leaf);
  }

  auto scores = critic(leaves);
  std::vector<torch::Tensor> grads(leaf_list.size());
  if (scores.requires_grad()) {
    grads = torch::autograd::grad({scores.sum()}, leaf_list, /*grad_outputs=*/{},
                                  /*retain_graph=*/true, create_graph, /*allow_unused=*/true);
  }

  ScalePenalty out;
  torch::Tensor total;
  size_t i = 0;
  for (const auto& [r, leaf] : leaves) {
    auto g = grads[i++];
    if (!g.defined()) g = torch::zeros_like(leaf);
    auto value = per_sample(g.flatten(1)).mean();
    out.per_scale[r] = value;
    total = total.defined() ? total + value : value;
  }
  out.mean = total / static_cast<double>(out.per_scale.size());
  return out;
}

DiscriminatorLoss wgan_gp_disc_loss(const Critic& critic, const MultiScaleImageSet& real,
                                    const MultiScaleImageSet& fake, const WganGpOptions& options,
                                    at::Generator& gen) {
  check_aligned(real, fake);
  const int64_t batch = real.batch_size();
  const auto opts = real.top().options().requires_grad(false);

  MultiScaleImageSet interpolated;
  torch::Tensor shared_alpha = torch::rand({batch, 1, 1, 1}, gen, opts);
  for (const auto& [r, x] : real) {
    auto alpha = options.per_scale_alpha ? torch::rand({batch, 1, 1, 1}, gen, opts) : shared_alpha;
    interpolated.set(r, alpha * x.detach() + (1.0 - alpha) * fake.at(r).detach());
  }

  auto real_scores = critic(real);
  auto fake_scores = critic(fake);
  auto gp = multi_scale_gradient_penalty(critic, interpolated, [](const torch::Tensor& g) {
    return (g.norm(2, 1) - 1.0).pow(2);
  });

  DiscriminatorLoss loss;
  auto wasserstein = fake_scores.mean() - real_scores.mean();
  auto drift = real_scores.pow(2).mean();
  loss.total = wasserstein + options.lambda * gp.mean + options.drift * drift;
  loss.penalty = gp.mean;
  loss.report = penalty_report(gp);
  loss.report.disc_loss = loss.total.item<double>();
  return loss;
}

torch::Tensor wgan_gen_loss(const Critic& critic, const MultiScaleImageSet& fake) {
  return -critic(fake).mean();
}

DiscriminatorLoss nonsat_disc_loss(const Critic& critic, const MultiScaleImageSet& real,
                                   const MultiScaleImageSet& fake, const NonSatOptions& options) {
  check_aligned(real, fake);
  auto real_scores = critic(real);
  auto fake_scores = critic(fake);

  std::function<torch::Tensor(const torch::Tensor&)> per_sample;
  if (options.real_penalty == RealPenalty::zero_centered) {
    per_sample = [](const torch::Tensor& g) { return g.pow(2).sum(1); };
  } else {
    per_sample = [](const torch::Tensor& g) { return torch::relu(g.norm(2, 1) - 1.0).pow(2); };
  }
  auto penalty = multi_scale_gradient_penalty(critic, real, per_sample);

  DiscriminatorLoss loss;
  loss.total = torch::softplus(-real_scores).mean() + torch::softplus(fake_scores).mean() +
               0.5 * options.gamma * penalty.mean;
  loss.penalty = penalty.mean;
  loss.report = penalty_report(penalty);
  loss.report.disc_loss = loss.total.item<double>();
  return loss;
}

torch::Tensor nonsat_gen_loss(const Critic& critic, const MultiScaleImageSet& fake) {
  return torch::softplus(-critic(fake)).mean();
}

LossReport nonsat_gp_losses(const Critic& critic, const MultiScaleImageSet& real,
                            const MultiScaleImageSet& fake, const NonSatOptions& options) {
  auto report = nonsat_disc_loss(critic, real, fake, options).report;
  report.gen_loss = nonsat_gen_loss(critic, fake).item<double>();
  return report;
}

}  // namespace msggan
