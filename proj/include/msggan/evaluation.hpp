#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>

#include "msggan/data.hpp"
#include "msggan/generator.hpp"
#include "msggan/metrics.hpp"

namespace msggan {

/// Forward pass without autograd, in chunks so large latent sets fit memory.
MultiScaleImageSet generate(Generator& generator, const torch::Tensor& latents, int64_t chunk = 64);

/// Fréchet distance between extractor features of `n` generated top-scale
/// images (latents drawn from `seed`) and up to `n` dataset images.
double fid_proxy(Generator& generator, const ImageDataset& dataset, const FeatureExtractor& extractor,
                 int64_t n, uint64_t seed);

/// One row per latent, one column per scale; coarse scales are nearest
/// upscaled to the top resolution.
void write_sample_grid(const MultiScaleImageSet& images, const std::filesystem::path& path);

/// Near-square tiling of the top-scale images only.
void write_top_grid(const MultiScaleImageSet& images, const std::filesystem::path& path);

/// Convenience for a generator and latents: writes `<stem>_scales.png` and
/// `<stem>_top.png` inside `dir`.
void write_grids(Generator& generator, const torch::Tensor& latents, const std::filesystem::path& dir,
                 const std::string& stem);

}  // namespace msggan
