#pragma once

#include <torch/torch.h>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "msggan/multiscale.hpp"

namespace msggan {

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance of an n x d feature matrix (n >= 2).
FeatureStats feature_stats(const Eigen::MatrixXd& features);
FeatureStats feature_stats(const torch::Tensor& features);

Eigen::MatrixXd to_eigen(const torch::Tensor& matrix);

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The trace of the
/// root is taken through the symmetric product S_a^{1/2} S_b S_a^{1/2}, with
/// negative eigenvalues clamped to zero. Throws std::invalid_argument on a
/// dimension mismatch and NumericError when either covariance is not PSD
/// within tolerance.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

struct InceptionScore {
  double mean = 0.0;
  double stddev = 0.0;
};

/// exp(mean_x KL(p(y|x) || p(y))) per split, p(y) the split marginal;
/// population mean/std over `splits` equal consecutive splits. Rows must be
/// non-negative and sum to 1 within 1e-5.
InceptionScore inception_score(const Eigen::MatrixXd& probs, int64_t splits = 10);

/// Image -> feature vector, images given as N x 3 x r x r in [-1, 1].
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int64_t dim() const = 0;
  virtual torch::Tensor features(const torch::Tensor& images) const = 0;
};

/// Image -> class probabilities (rows sum to one).
class ClassProbabilityModel {
 public:
  virtual ~ClassProbabilityModel() = default;
  virtual int64_t classes() const = 0;
  virtual torch::Tensor probabilities(const torch::Tensor& images) const = 0;
};

/// Fixed, untrained feature map used for the FID-proxy: images are brought to
/// 32x32, then described by 4x4 average colours plus global pools of two
/// layers of seeded random convolutions. Numbers computed with it are only
/// comparable with each other, never with published FID values.
class RandomProjectionExtractor : public FeatureExtractor, public ClassProbabilityModel {
 public:
  explicit RandomProjectionExtractor(uint64_t seed = 0x46494450ULL, int64_t num_classes = 10);

  int64_t dim() const override;
  torch::Tensor features(const torch::Tensor& images) const override;
  int64_t classes() const override { return num_classes_; }
  torch::Tensor probabilities(const torch::Tensor& images) const override;

 private:
  torch::Tensor conv1_;
  torch::Tensor conv2_;
  torch::Tensor classifier_;
  int64_t num_classes_;
};

/// Fixed-latent images from one epoch boundary, in [0, 1] pixel space.
struct Snapshot {
  int64_t epoch = 0;
  uint64_t latent_digest = 0;
  MultiScaleImageSet images;
};

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
Snapshot read_snapshot(const std::filesystem::path& path);
/// All snapshot files in a directory, ordered by epoch.
std::vector<Snapshot> read_snapshots(const std::filesystem::path& dir);

uint64_t tensor_digest(const torch::Tensor& t);

/// mse[r][k] is the per-pixel MSE at scale r between snapshots k and k-1
/// (epochs[k] is the later epoch).
struct StabilityCurve {
  std::vector<int64_t> epochs;
  std::map<int64_t, std::vector<double>> mse;
};

/// Throws std::invalid_argument with "need >= 2 epochs" for fewer than two
/// snapshots, and on a latent-set mismatch between snapshots.
StabilityCurve stability_curve(std::span<const Snapshot> snapshots);
StabilityCurve stability_curve(const std::filesystem::path& snapshot_dir);

/// stability.csv (`epoch,scale,mse`), stability_meta.json and a line plot
/// per scale in stability.png.
void write_stability_outputs(const StabilityCurve& curve, const std::filesystem::path& dir);

/// Least-squares slope of y against x.
double linear_fit_slope(std::span<const double> x, std::span<const double> y);

/// Slope of each scale's MSE over the final third of the curve's epochs.
std::map<int64_t, double> final_third_slopes(const StabilityCurve& curve);

}  // namespace msggan
