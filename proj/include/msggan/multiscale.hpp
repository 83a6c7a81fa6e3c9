#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace msggan {

/// One image batch (batch x 3 x r x r) per resolution, keyed by r.
class MultiScaleImageSet {
 public:
  MultiScaleImageSet() = default;
  explicit MultiScaleImageSet(std::map<int64_t, torch::Tensor> images);

  void set(int64_t resolution, torch::Tensor images);
  const torch::Tensor& at(int64_t resolution) const;
  bool contains(int64_t resolution) const { return images_.contains(resolution); }
  bool empty() const { return images_.empty(); }
  size_t size() const { return images_.size(); }

  int64_t top_resolution() const;
  const torch::Tensor& top() const { return at(top_resolution()); }
  int64_t batch_size() const;
  std::vector<int64_t> resolutions() const;

  /// Copy holding only the given resolutions; every one must be present.
  MultiScaleImageSet restricted_to(const std::set<int64_t>& resolutions) const;
  MultiScaleImageSet detached() const;
  MultiScaleImageSet rows(int64_t begin, int64_t end) const;

  /// Throws std::invalid_argument unless every entry is batch x 3 x r x r with
  /// a common batch size.
  void validate() const;

  auto begin() const { return images_.begin(); }
  auto end() const { return images_.end(); }

 private:
  std::map<int64_t, torch::Tensor> images_;
};

/// (operation, C x H x W) rows recorded during a forward pass.
struct ShapeRow {
  std::string op;
  std::vector<int64_t> shape;
  bool operator==(const ShapeRow&) const = default;
};
using ShapeTrace = std::vector<ShapeRow>;

void record_shape(ShapeTrace* trace, std::string op, const torch::Tensor& t);

/// Prints `op CxHxW`.
std::ostream& operator<<(std::ostream& os, const ShapeRow& row);

}  // namespace msggan
