#include "msggan/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "msggan/image_io.hpp"

namespace msggan {

namespace fs = std::filesystem;

MultiScaleImageSet generate(Generator& generator, const torch::Tensor& latents, int64_t chunk) {
  torch::NoGradGuard no_grad;
  if (chunk < 1) throw std::invalid_argument("generate: chunk must be positive");
  std::map<int64_t, std::vector<torch::Tensor>> parts;
  for (int64_t begin = 0; begin < latents.size(0); begin += chunk) {
    const int64_t end = std::min(latents.size(0), begin + chunk);
    auto out = generator->forward(latents.slice(0, begin, end));
    for (const auto& [r, t] : out) parts[r].push_back(t);
  }
  MultiScaleImageSet result;
  for (auto& [r, list] : parts) result.set(r, torch::cat(list, 0));
  return result;
}

double fid_proxy(Generator& generator, const ImageDataset& dataset, const FeatureExtractor& extractor,
                 int64_t n, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("fid_proxy needs at least two samples");
  const int64_t real_n = std::min(n, dataset.size());
  if (real_n < 2) throw std::invalid_argument("fid_proxy needs at least two dataset images");
  auto real_features = extractor.features(dataset.images(0, real_n));

  auto gen = at::detail::createCPUGenerator(seed);
  const auto latents = sample_latent(n, generator->spec().latent_dim, gen);
  auto fake = generate(generator, latents).top();
  if (fake.size(2) != dataset.resolution()) {
    throw std::invalid_argument("fid_proxy: generator and dataset resolutions differ");
  }
  auto fake_features = extractor.features(fake.clamp(-1.0, 1.0));
  return frechet_distance(feature_stats(real_features), feature_stats(fake_features));
}

namespace {

torch::Tensor upscale_to(const torch::Tensor& images, int64_t size) {
  if (images.size(2) == size) return images;
  const int64_t factor = size / images.size(2);
  return images.repeat_interleave(factor, 2).repeat_interleave(factor, 3);
}

// images: rows x cols x 3 x r x r in [-1, 1]
void write_tiles(const torch::Tensor& tiles, const fs::path& path) {
  const int64_t rows = tiles.size(0), cols = tiles.size(1), r = tiles.size(3);
  auto canvas = tiles.permute({2, 0, 3, 1, 4}).reshape({3, rows * r, cols * r});
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_png(path, tensor_to_image(quantize_u8(canvas)));
}

}  // namespace

void write_sample_grid(const MultiScaleImageSet& images, const fs::path& path) {
  images.validate();
  const int64_t top = images.top_resolution();
  std::vector<torch::Tensor> columns;
  for (const auto& [r, t] : images) columns.push_back(upscale_to(t.detach().to(torch::kFloat32), top));
  write_tiles(torch::stack(columns, 1), path);
}

void write_top_grid(const MultiScaleImageSet& images, const fs::path& path) {
  images.validate();
  auto top = images.top().detach().to(torch::kFloat32);
  const int64_t n = top.size(0);
  const auto cols = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int64_t rows = (n + cols - 1) / cols;
  if (rows * cols > n) {
    top = torch::cat({top, torch::full({rows * cols - n, 3, top.size(2), top.size(3)}, -1.0)}, 0);
  }
  write_tiles(top.view({rows, cols, 3, top.size(2), top.size(3)}), path);
}

void write_grids(Generator& generator, const torch::Tensor& latents, const fs::path& dir,
                 const std::string& stem) {
  auto images = generate(generator, latents);
  write_sample_grid(images, dir / (stem + "_scales.png"));
  write_top_grid(images, dir / (stem + "_top.png"));
}

}  // namespace msggan
