#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msggan/config.hpp"
#include "msggan/data.hpp"
#include "msggan/discriminator.hpp"
#include "msggan/generator.hpp"
#include "msggan/losses.hpp"
#include "msggan/rmsprop.hpp"

namespace msggan {

/// Everything needed to continue a run. The random state is the pair
/// (seed, step): every step draws from a generator seeded by both.
struct TrainingState {
  ExperimentConfig config;
  ArchitectureSpec spec;
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  std::unique_ptr<RmsProp> gen_optimizer;
  std::unique_ptr<RmsProp> disc_optimizer;
  Generator ema{nullptr};  // null unless config.ema_beta > 0
  torch::Tensor fixed_eval_latents;
  int64_t step = 0;
  int64_t real_images_shown = 0;

  /// Loss sums over the steps of the current epoch, persisted so a resumed
  /// run writes the same metric rows as an uninterrupted one.
  struct EpochSums {
    double gen_loss = 0.0;
    double disc_loss = 0.0;
    double penalty = 0.0;
    int64_t steps = 0;
  } epoch_sums;

  /// The generator used for evaluation: the average when enabled.
  Generator& eval_generator() { return ema ? ema : generator; }

  /// Canonical name -> tensor for every persisted tensor (parameters,
  /// optimizer moments, average, fixed latents).
  std::map<std::string, torch::Tensor> named_tensors() const;
};

/// Builds networks and optimizers for a validated configuration without
/// drawing any parameters.
TrainingState make_training_state(const ExperimentConfig& config);

/// Parameters ~ N(0, 1) from the seed, zero moments, fixed evaluation
/// latents drawn once. `seed` overrides config.seed when given.
TrainingState init_training(const ExperimentConfig& config, std::optional<uint64_t> seed = std::nullopt);

struct StepReport {
  LossReport losses;
  /// Frobenius norm of the generator-loss gradient over each to-RGB head.
  std::map<int64_t, double> to_rgb_grad_norms;
};

/// One discriminator update on (real pyramid, fresh fakes), then one
/// generator update on fresh fakes. Throws std::invalid_argument on a batch
/// that does not match the architecture and TrainingDivergence, leaving the
/// state untouched, when a loss is non-finite.
StepReport train_step(TrainingState& state, const RealBatch& real);

struct TrainOptions {
  /// Continue from <out>/checkpoints/latest.ckpt instead of starting fresh.
  bool resume = false;
  /// Stop (with a checkpoint) once this many real images have been shown;
  /// negative means run to the budget.
  int64_t stop_after_images = -1;
  bool verbose = false;
};

struct MetricRow {
  int64_t step = 0;
  int64_t real_images_shown = 0;

  /// Loss sums over the steps of the current epoch, persisted so a resumed
  /// run writes the same metric rows as an uninterrupted one.
  struct EpochSums {
    double gen_loss = 0.0;
    double disc_loss = 0.0;
    double penalty = 0.0;
    int64_t steps = 0;
  } epoch_sums;
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double penalty = 0.0;
  std::optional<double> fid_proxy;
};

struct TrainResult {
  std::filesystem::path out_dir;
  std::filesystem::path final_checkpoint;
  int64_t step = 0;
  int64_t real_images_shown = 0;

  /// Loss sums over the steps of the current epoch, persisted so a resumed
  /// run writes the same metric rows as an uninterrupted one.
  struct EpochSums {
    double gen_loss = 0.0;
    double disc_loss = 0.0;
    double penalty = 0.0;
    int64_t steps = 0;
  } epoch_sums;
  std::optional<double> initial_fid_proxy;
  std::optional<double> final_fid_proxy;
  std::vector<MetricRow> rows;  // rows written by this invocation
  bool diverged = false;
  std::string divergence_message;
  bool interrupted = false;
  double seconds = 0.0;
};

/// Runs until real_images_shown >= budget. Writes config.json, metrics.csv,
/// grad_norms.csv, grids/, snapshots/, checkpoints/ and, with two or more
/// epoch snapshots, the stability outputs. A fresh run refuses an output
/// directory that already holds a run. Divergence is checkpointed and
/// reported in the result rather than thrown.
TrainResult train(const ExperimentConfig& config, const TrainOptions& options = {});

std::filesystem::path latest_checkpoint_path(const std::filesystem::path& out_dir);

}  // namespace msggan
