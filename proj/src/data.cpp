#include "msggan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>

#include "msggan/errors.hpp"
#include "msggan/image_io.hpp"

namespace msggan {

namespace fs = std::filesystem;

uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t index) {
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

MultiScaleImageSet build_pyramid(const torch::Tensor& batch, std::span<const int64_t> schedule) {
  if (schedule.empty()) throw std::invalid_argument("build_pyramid: empty schedule");
  const int64_t top = schedule.back();
  if (batch.dim() != 4 || batch.size(1) != 3 || batch.size(2) != top || batch.size(3) != top) {
    throw std::invalid_argument("build_pyramid: expected N x 3 x " + std::to_string(top) + " x " +
                                std::to_string(top) + " input");
  }
  MultiScaleImageSet out;
  auto level = batch;
  for (auto it = schedule.rbegin(); it != schedule.rend(); ++it) {
    while (level.size(2) > *it) level = torch::avg_pool2d(level, 2);
    out.set(*it, level);
  }
  return out;
}

// ---- ImageDataset ----------------------------------------------------------

ImageDataset::ImageDataset(torch::Tensor images_u8, std::vector<ToyFactors> factors)
    : images_(std::move(images_u8)), factors_(std::move(factors)) {
  if (images_.dim() != 4 || images_.size(1) != 3 || images_.size(2) != images_.size(3) ||
      images_.scalar_type() != torch::kUInt8) {
    throw std::invalid_argument("ImageDataset expects N x 3 x r x r uint8 images");
  }
  if (images_.size(0) == 0) throw std::runtime_error("dataset is empty");
}

torch::Tensor ImageDataset::images(const torch::Tensor& indices) const {
  return normalize_u8(images_.index_select(0, indices));
}

torch::Tensor ImageDataset::images(int64_t begin, int64_t end) const {
  return normalize_u8(images_.slice(0, begin, end));
}

// ---- synthetic -------------------------------------------------------------

namespace {

std::array<double, 3> hue_to_rgb(double hue) {
  const double h = hue * 6.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  switch (static_cast<int>(h) % 6) {
    case 0: return {1.0, x, 0.0};
    case 1: return {x, 1.0, 0.0};
    case 2: return {0.0, 1.0, x};
    case 3: return {0.0, x, 1.0};
    case 4: return {x, 0.0, 1.0};
    default: return {1.0, 0.0, x};
  }
}

bool inside(const ToyFactors& f, double px, double py) {
  const double dx = px - f.center_x;
  const double dy = py - f.center_y;
  switch (f.shape) {
    case ToyShape::disc:
      return dx * dx + dy * dy <= f.half_size * f.half_size;
    case ToyShape::square:
      return std::abs(dx) <= f.half_size && std::abs(dy) <= f.half_size;
    case ToyShape::triangle: {
      // upward isosceles triangle inscribed in the square of side 2*half_size
      if (dy < -f.half_size || dy > f.half_size) return false;
      const double t = (dy + f.half_size) / (2.0 * f.half_size);  // 0 at apex row
      return std::abs(dx) <= t * f.half_size;
    }
  }
  return false;
}

void render(const ToyFactors& f, int64_t r, uint8_t* chw) {
  constexpr int kSuper = 4;
  const auto colour = hue_to_rgb(f.hue);
  for (int64_t y = 0; y < r; ++y) {
    for (int64_t x = 0; x < r; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = (static_cast<double>(x) + (sx + 0.5) / kSuper) / static_cast<double>(r);
          const double py = (static_cast<double>(y) + (sy + 0.5) / kSuper) / static_cast<double>(r);
          hits += inside(f, px, py) ? 1 : 0;
        }
      }
      const double coverage = static_cast<double>(hits) / (kSuper * kSuper);
      for (int c = 0; c < 3; ++c) {
        chw[(c * r + y) * r + x] = static_cast<uint8_t>(std::lround(255.0 * coverage * colour[c]));
      }
    }
  }
}

}  // namespace

ImageDataset synthesize_toy_dataset(const ToyDatasetParams& params, uint64_t seed) {
  const int64_t r = params.resolution;
  if (r < 4 || r > 128 || !std::has_single_bit(static_cast<uint64_t>(r))) {
    throw std::invalid_argument("synthetic resolution must be a power of two in [4, 128]");
  }
  if (params.size < 1) throw std::invalid_argument("synthetic dataset size must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shape_dist(0, 2);
  std::uniform_real_distribution<double> centre(0.3, 0.7);
  std::uniform_real_distribution<double> size_dist(0.15, 0.3);
  std::uniform_real_distribution<double> hue_dist(0.0, 1.0);

  auto images = torch::zeros({params.size, 3, r, r}, torch::kUInt8);
  std::vector<ToyFactors> factors;
  factors.reserve(static_cast<size_t>(params.size));
  auto* data = images.data_ptr<uint8_t>();
  for (int64_t i = 0; i < params.size; ++i) {
    ToyFactors f;
    f.shape = static_cast<ToyShape>(shape_dist(rng));
    f.center_x = centre(rng);
    f.center_y = centre(rng);
    f.half_size = size_dist(rng);
    f.hue = hue_dist(rng);
    render(f, r, data + i * 3 * r * r);
    factors.push_back(f);
  }
  return ImageDataset(images, std::move(factors));
}

// ---- files -----------------------------------------------------------------

namespace {

torch::Tensor square_resize(const torch::Tensor& chw_u8, int64_t resolution) {
  const int64_t h = chw_u8.size(1);
  const int64_t w = chw_u8.size(2);
  const int64_t side = std::min(h, w);
  auto crop = chw_u8.slice(1, (h - side) / 2, (h - side) / 2 + side)
                  .slice(2, (w - side) / 2, (w - side) / 2 + side);
  if (side == resolution) return crop.contiguous();
  namespace F = torch::nn::functional;
  auto x = crop.unsqueeze(0).to(torch::kFloat32);
  auto opts = F::InterpolateFuncOptions().size(std::vector<int64_t>{resolution, resolution});
  if (side > resolution) {
    opts.mode(torch::kArea);
  } else {
    opts.mode(torch::kBilinear).align_corners(false);
  }
  return F::interpolate(x, opts).squeeze(0).round().clamp(0, 255).to(torch::kUInt8);
}

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

ImageDataset load_image_folder(const fs::path& root, int64_t resolution, int64_t max_items) {
  if (!fs::is_directory(root)) throw std::runtime_error("image folder not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<torch::Tensor> images;
  for (const auto& file : files) {
    if (max_items > 0 && static_cast<int64_t>(images.size()) >= max_items) break;
    try {
      images.push_back(square_resize(image_to_tensor(read_image(file)), resolution));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << "\n";
    }
  }
  if (images.empty()) throw std::runtime_error("no readable images in " + root.string());
  return ImageDataset(torch::stack(images));
}

ImageDataset load_cifar10_archive(const fs::path& root, int64_t resolution, int64_t max_items) {
  if (resolution > 32) throw ConfigError("CIFAR-10 images are 32x32; cannot serve " +
                                         std::to_string(resolution));
  constexpr int64_t kRecord = 1 + 3 * 32 * 32;
  const std::vector<std::string> names = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
  std::vector<uint8_t> pixels;
  int64_t count = 0;
  for (const auto& name : names) {
    const auto path = root / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      std::cerr << "warning: missing CIFAR-10 batch " << path.string() << "\n";
      continue;
    }
    std::vector<char> record(kRecord);
    while (in.read(record.data(), kRecord)) {
      if (max_items > 0 && count >= max_items) break;
      pixels.insert(pixels.end(), record.begin() + 1, record.end());
      ++count;
    }
    if (in.gcount() != 0 && in.gcount() != kRecord) {
      std::cerr << "warning: truncated record at end of " << path.string() << "\n";
    }
  }
  if (count == 0) throw std::runtime_error("no CIFAR-10 records under " + root.string());
  auto images = torch::from_blob(pixels.data(), {count, 3, 32, 32}, torch::kUInt8).clone();
  if (resolution < 32) {
    images = torch::avg_pool2d(images.to(torch::kFloat32), 32 / resolution)
                 .round()
                 .clamp(0, 255)
                 .to(torch::kUInt8);
  }
  return ImageDataset(images);
}

DatasetSource dataset_source(const ExperimentConfig& config) {
  DatasetSource s;
  s.kind = config.dataset;
  s.root = config.dataset_root;
  s.resolution = config.final_resolution;
  s.size = config.dataset_size;
  s.seed = config.dataset_seed;
  return s;
}

ImageDataset materialize(const DatasetSource& source) {
  switch (source.kind) {
    case DatasetKind::synthetic:
      return synthesize_toy_dataset({source.resolution, source.size}, source.seed);
    case DatasetKind::image_folder:
      return load_image_folder(source.root, source.resolution, source.size);
    case DatasetKind::cifar10_archive:
      return load_cifar10_archive(source.root, source.resolution, source.size);
  }
  throw std::logic_error("unknown dataset kind");
}

// ---- BatchLoader -----------------------------------------------------------

BatchLoader::BatchLoader(std::shared_ptr<const ImageDataset> dataset, int64_t batch_size,
                         uint64_t shuffle_seed, std::vector<int64_t> schedule)
    : dataset_(std::move(dataset)),
      batch_size_(batch_size),
      shuffle_seed_(shuffle_seed),
      schedule_(std::move(schedule)) {
  if (!dataset_) throw std::invalid_argument("BatchLoader: null dataset");
  if (batch_size_ < 1) throw std::invalid_argument("BatchLoader: batch_size must be >= 1");
  if (schedule_.empty() || schedule_.back() != dataset_->resolution()) {
    throw std::invalid_argument("BatchLoader: dataset resolution does not match the schedule");
  }
  batches_per_epoch_ = dataset_->size() / batch_size_;
  if (batches_per_epoch_ == 0) {
    throw std::runtime_error("dataset of " + std::to_string(dataset_->size()) +
                             " images is smaller than one batch of " + std::to_string(batch_size_));
  }
}

torch::Tensor BatchLoader::permutation(int64_t epoch) const {
  auto gen = at::detail::createCPUGenerator(derive_seed(shuffle_seed_, 0x5348554646ULL, epoch));
  return torch::randperm(dataset_->size(), gen, torch::kLong);
}

RealBatch BatchLoader::batch(int64_t epoch, int64_t index) const {
  if (index < 0 || index >= batches_per_epoch_) throw std::out_of_range("batch index out of range");
  auto idx = permutation(epoch).slice(0, index * batch_size_, (index + 1) * batch_size_);
  RealBatch b;
  b.images = dataset_->images(idx);
  b.pyramid = build_pyramid(b.images, schedule_);
  return b;
}

RealBatch BatchLoader::next() {
  const int64_t epoch = cursor_ / batches_per_epoch_;
  const int64_t index = cursor_ % batches_per_epoch_;
  ++cursor_;
  return batch(epoch, index);
}

}  // namespace msggan
