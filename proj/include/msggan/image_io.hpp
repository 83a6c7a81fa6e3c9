#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace msggan {

/// 8-bit interleaved RGB image.
struct Rgb8Image {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;  // height * width * 3
};

/// Decodes PNG or JPEG (detected from the file signature). Grayscale, palette
/// and alpha inputs are converted to RGB. Throws std::runtime_error.
Rgb8Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG with fixed encoder settings, so equal pixels give
/// equal bytes.
void write_png(const std::filesystem::path& path, const Rgb8Image& image);

/// 3 x H x W uint8 tensor <-> Rgb8Image.
torch::Tensor image_to_tensor(const Rgb8Image& image);
Rgb8Image tensor_to_image(const torch::Tensor& chw_u8);

/// [-1, 1] float -> [0, 1] (affine, unclamped) and back.
torch::Tensor to_unit_range(const torch::Tensor& x);
torch::Tensor from_unit_range(const torch::Tensor& x);

/// [0, 255] uint8 -> [-1, 1] float and back (the latter clamps and rounds).
torch::Tensor normalize_u8(const torch::Tensor& u8);
torch::Tensor quantize_u8(const torch::Tensor& x);

}  // namespace msggan
