#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "msggan/config.hpp"
#include "msggan/multiscale.hpp"

namespace msggan {

/// Successive 2x2 box averages of a batch at the top resolution of
/// `schedule`, one entry per schedule level. Throws std::invalid_argument
/// when the batch is not N x 3 x top x top.
MultiScaleImageSet build_pyramid(const torch::Tensor& batch, std::span<const int64_t> schedule);

enum class ToyShape { disc, square, triangle };

/// Generative factors of one synthetic image. Positions and size are in
/// units of the image width.
struct ToyFactors {
  ToyShape shape = ToyShape::disc;
  double center_x = 0.5;
  double center_y = 0.5;
  double half_size = 0.2;
  double hue = 0.0;  // [0, 1)
};

struct ToyDatasetParams {
  int64_t resolution = 32;
  int64_t size = 512;
};

/// Source description; `materialize` turns it into pixels.
struct DatasetSource {
  DatasetKind kind = DatasetKind::synthetic;
  std::filesystem::path root;
  int64_t resolution = 32;
  int64_t size = 0;  // synthetic: exact size; otherwise a cap (0 = everything)
  uint64_t seed = 0;
};

/// A fixed set of 3 x r x r images stored as uint8 (values map to [-1, 1]).
class ImageDataset {
 public:
  explicit ImageDataset(torch::Tensor images_u8, std::vector<ToyFactors> factors = {});

  int64_t size() const { return images_.size(0); }
  int64_t resolution() const { return images_.size(2); }
  const torch::Tensor& raw() const { return images_; }
  const std::vector<ToyFactors>& factors() const { return factors_; }

  /// Normalized float images for the given rows.
  torch::Tensor images(const torch::Tensor& indices) const;
  torch::Tensor images(int64_t begin, int64_t end) const;

 private:
  torch::Tensor images_;
  std::vector<ToyFactors> factors_;
};

/// Colored discs, squares and triangles on black, one per image, factors
/// drawn i.i.d.: shape uniform, centre uniform in [0.3, 0.7]^2, half-size
/// uniform in [0.15, 0.3], hue uniform in [0, 1). Reproducible from `seed`.
/// Throws std::invalid_argument unless resolution is a power of two in
/// [4, 128] and size >= 1.
ImageDataset synthesize_toy_dataset(const ToyDatasetParams& params, uint64_t seed);

/// PNG/JPEG files directly inside `root` (sorted by name), centre-cropped to
/// square and resized to `resolution`. Unreadable files are skipped with a
/// warning on stderr; an empty result throws std::runtime_error.
ImageDataset load_image_folder(const std::filesystem::path& root, int64_t resolution,
                               int64_t max_items = 0);

/// The CIFAR-10 binary layout: data_batch_1..5.bin and test_batch.bin, each a
/// run of 3073-byte records (label byte + 32x32 R, G, B planes). Missing
/// batch files are skipped with a warning. Resolutions below 32 are box
/// downsampled; above 32 is an error.
ImageDataset load_cifar10_archive(const std::filesystem::path& root, int64_t resolution = 32,
                                  int64_t max_items = 0);

DatasetSource dataset_source(const ExperimentConfig& config);
ImageDataset materialize(const DatasetSource& source);

struct RealBatch {
  torch::Tensor images;  // N x 3 x r x r in [-1, 1]
  MultiScaleImageSet pyramid;
};

/// Repeatable batch sequence over a dataset: epoch e visits a permutation
/// seeded by (shuffle_seed, e) in full batches; a trailing partial batch is
/// dropped. Single-threaded, so the order is fully deterministic.
class BatchLoader {
 public:
  BatchLoader(std::shared_ptr<const ImageDataset> dataset, int64_t batch_size,
              uint64_t shuffle_seed, std::vector<int64_t> schedule);

  int64_t batches_per_epoch() const { return batches_per_epoch_; }
  int64_t batch_size() const { return batch_size_; }
  const ImageDataset& dataset() const { return *dataset_; }

  RealBatch batch(int64_t epoch, int64_t index) const;

  /// Sequential access; `seek` positions the cursor at a global batch index.
  RealBatch next();
  void seek(int64_t global_index) { cursor_ = global_index; }
  int64_t position() const { return cursor_; }

 private:
  torch::Tensor permutation(int64_t epoch) const;

  std::shared_ptr<const ImageDataset> dataset_;
  int64_t batch_size_;
  uint64_t shuffle_seed_;
  std::vector<int64_t> schedule_;
  int64_t batches_per_epoch_;
  int64_t cursor_ = 0;
};

/// splitmix64-style mixing of a base seed with stream identifiers.
uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t index = 0);

}  // namespace msggan
