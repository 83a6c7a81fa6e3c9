#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "msggan/arch_spec.hpp"
#include "msggan/losses.hpp"

namespace msggan {

enum class DatasetKind { synthetic, image_folder, cifar10_archive };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text, std::string_view field = "dataset");

/// Every knob of one experiment. Serialized as a flat JSON object; unknown
/// keys and ill-typed values are rejected with a ConfigError naming the key.
struct ExperimentConfig {
  // data
  DatasetKind dataset = DatasetKind::synthetic;
  std::string dataset_root;
  int64_t dataset_size = 512;  // synthetic size, or a cap for folders/archives (0 = all)
  uint64_t dataset_seed = 1234;

  // architecture
  int64_t final_resolution = 32;
  int64_t latent_dim = 512;
  int64_t width_divisor = 1;
  CombineKind combine_kind = CombineKind::simple;
  ConnectionMode connection_mode = ConnectionMode::all;
  LossKind loss_kind = LossKind::wgan_gp;
  bool equalized_lr = true;

  // optimization
  double lr = 0.003;
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-8;
  int64_t batch_size = 16;
  int64_t budget = 100000;  // real images shown
  uint64_t seed = 0;
  double gp_lambda = 10.0;
  double drift = 0.001;
  bool per_scale_alpha = false;
  double r1_gamma = 10.0;
  RealPenalty real_penalty = RealPenalty::zero_centered;
  double ema_beta = 0.0;  // 0 disables generator averaging

  // outputs
  std::string out_dir = "runs/default";
  std::string extractor = "random_projection";
  int64_t fid_samples = 512;       // images per side for the FID-proxy; 0 disables
  int64_t fid_every_epochs = 1;
  int64_t checkpoint_every = 0;    // real images between checkpoints; 0 = only at the end
  int64_t grid_every_epochs = 1;   // 0 disables per-epoch grids
  int64_t eval_latents = 36;

  ArchitectureOptions architecture() const;
  /// Throws ConfigError naming the offending field; also resolves the
  /// architecture to surface schedule errors before any work starts.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// FNV-1a over the canonical JSON dump.
uint64_t config_hash(const ExperimentConfig& config);

}  // namespace msggan
