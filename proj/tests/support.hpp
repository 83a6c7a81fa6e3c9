#pragma once

#include <doctest.h>
#include <torch/torch.h>

#include <filesystem>
#include <random>
#include <string>

#include "msggan/config.hpp"

namespace msggan::testing {

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("msggan_test_" + name + "_" + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A small 16x16 run that finishes in seconds.
inline ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.final_resolution = 16;
  c.latent_dim = 32;
  c.width_divisor = 64;
  c.dataset_size = 64;
  c.batch_size = 8;
  c.budget = 128;
  c.fid_samples = 32;
  c.eval_latents = 36;
  c.out_dir = out.string();
  return c;
}

inline bool bitwise_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes().equals(b.sizes()) && a.scalar_type() == b.scalar_type() && torch::equal(a, b);
}

}  // namespace msggan::testing
