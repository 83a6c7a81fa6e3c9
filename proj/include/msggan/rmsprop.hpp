#pragma once

#include <torch/torch.h>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace msggan {

struct RmsPropOptions {
  double lr = 0.003;
  double alpha = 0.99;
  double eps = 1e-8;
};

/// v <- alpha * v + (1 - alpha) * g^2;  p <- p - lr * g / (sqrt(v) + eps).
/// Moments are keyed by the parameter's canonical name.
class RmsProp {
 public:
  RmsProp(std::vector<std::pair<std::string, torch::Tensor>> params, RmsPropOptions options);

  void zero_grad();
  void step();

  const RmsPropOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  const std::map<std::string, torch::Tensor>& moments() const { return moments_; }
  /// Shapes and key set must match; values are copied in place.
  void load_moments(const std::map<std::string, torch::Tensor>& moments);

 private:
  std::vector<std::pair<std::string, torch::Tensor>> params_;
  std::map<std::string, torch::Tensor> moments_;
  RmsPropOptions options_;
};

}  // namespace msggan
