#include "msggan/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "msggan/errors.hpp"
#include "msggan/image_io.hpp"

namespace msggan {

namespace fs = std::filesystem;

// ---- Fréchet distance ------------------------------------------------------

Eigen::MatrixXd to_eigen(const torch::Tensor& matrix) {
  if (matrix.dim() != 2) throw std::invalid_argument("to_eigen expects a 2-D tensor");
  auto m = matrix.detach().to(torch::kFloat64).contiguous();
  Eigen::MatrixXd out(m.size(0), m.size(1));
  const double* src = m.data_ptr<double>();
  for (int64_t i = 0; i < m.size(0); ++i) {
    for (int64_t j = 0; j < m.size(1); ++j) out(i, j) = src[i * m.size(1) + j];
  }
  return out;
}

FeatureStats feature_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw std::invalid_argument("feature_stats needs at least two rows");
  FeatureStats s;
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

FeatureStats feature_stats(const torch::Tensor& features) { return feature_stats(to_eigen(features)); }

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError(std::string("eigensolver failed on ") + name);
  const auto& values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -1e-7 * scale) {
    throw NumericError(std::string(name) + " is not positive semi-definite (eigenvalue " +
                       std::to_string(values.minCoeff()) + ")");
  }
  const Eigen::VectorXd roots = values.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  const auto d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || a.cov.cols() != d || b.cov.rows() != d ||
      b.cov.cols() != d) {
    throw std::invalid_argument("frechet_distance: feature dimensions differ");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov, "first covariance");
  psd_sqrt(b.cov, "second covariance");
  Eigen::MatrixXd product = root_a * b.cov * root_a;
  product = 0.5 * (product + product.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(product, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigensolver failed on covariance product");
  const double trace_root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_root;
  if (value < 0.0) {
    const double tolerance = 1e-6 * std::max(1.0, a.cov.trace() + b.cov.trace());
    if (value < -tolerance) {
      throw NumericError("frechet_distance: negative result " + std::to_string(value));
    }
    return 0.0;
  }
  return value;
}

// ---- Inception Score -------------------------------------------------------

InceptionScore inception_score(const Eigen::MatrixXd& probs, int64_t splits) {
  const int64_t n = probs.rows();
  const int64_t c = probs.cols();
  if (n < 1 || c < 1) throw std::invalid_argument("inception_score: empty probability matrix");
  if (splits < 1 || splits > n) {
    throw std::invalid_argument("inception_score: splits must lie in [1, rows]");
  }
  for (int64_t i = 0; i < n; ++i) {
    if (probs.row(i).minCoeff() < 0.0 || std::abs(probs.row(i).sum() - 1.0) > 1e-5) {
      throw std::invalid_argument("inception_score: row " + std::to_string(i) +
                                  " is not a probability distribution");
    }
  }

  const int64_t part = n / splits;
  std::vector<long double> scores;
  for (int64_t s = 0; s < splits; ++s) {
    const int64_t begin = s * part;
    const int64_t end = begin + part;
    std::vector<long double> marginal(static_cast<size_t>(c), 0.0L);
    for (int64_t i = begin; i < end; ++i) {
      for (int64_t k = 0; k < c; ++k) marginal[static_cast<size_t>(k)] += probs(i, k);
    }
    for (auto& m : marginal) m /= static_cast<long double>(part);
    long double kl_sum = 0.0L;
    for (int64_t i = begin; i < end; ++i) {
      for (int64_t k = 0; k < c; ++k) {
        const long double p = probs(i, k);
        if (p > 0.0L) kl_sum += p * std::log(p / marginal[static_cast<size_t>(k)]);
      }
    }
    scores.push_back(std::exp(kl_sum / static_cast<long double>(part)));
  }
  long double mean = 0.0L;
  for (auto v : scores) mean += v;
  mean /= static_cast<long double>(scores.size());
  long double var = 0.0L;
  for (auto v : scores) var += (v - mean) * (v - mean);
  var /= static_cast<long double>(scores.size());
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var))};
}

// ---- random-projection extractor -------------------------------------------

RandomProjectionExtractor::RandomProjectionExtractor(uint64_t seed, int64_t num_classes)
    : num_classes_(num_classes) {
  auto gen = at::detail::createCPUGenerator(seed);
  conv1_ = torch::randn({32, 3, 5, 5}, gen) / std::sqrt(75.0);
  conv2_ = torch::randn({32, 32, 3, 3}, gen) / std::sqrt(288.0);
  classifier_ = torch::randn({dim(), num_classes_}, gen) / std::sqrt(static_cast<double>(dim()));
}

int64_t RandomProjectionExtractor::dim() const { return 48 + 32 + 32; }

torch::Tensor RandomProjectionExtractor::features(const torch::Tensor& images) const {
  torch::NoGradGuard no_grad;
  if (images.dim() != 4 || images.size(1) != 3) {
    throw std::invalid_argument("extractor expects N x 3 x r x r images");
  }
  auto x = images.detach().to(torch::kFloat32);
  if (x.size(2) > 32) {
    x = torch::adaptive_avg_pool2d(x, {32, 32});
  } else if (x.size(2) < 32) {
    x = torch::upsample_nearest2d(x, {32, 32});
  }
  auto colours = torch::adaptive_avg_pool2d(x, {4, 4}).flatten(1);
  auto h1 = torch::relu(torch::conv2d(x, conv1_, {}, 1, 2));
  auto pooled1 = h1.mean({2, 3});
  auto h2 = torch::relu(torch::conv2d(torch::avg_pool2d(h1, 2), conv2_, {}, 1, 1));
  auto pooled2 = h2.mean({2, 3});
  return torch::cat({colours, pooled1, pooled2}, 1);
}

torch::Tensor RandomProjectionExtractor::probabilities(const torch::Tensor& images) const {
  auto f = features(images);
  f = (f - f.mean(1, true)) / (f.std(1, true, true) + 1e-6);
  return torch::softmax(torch::matmul(f, classifier_), 1);
}

// ---- snapshots ---------------------------------------------------------------

namespace {

constexpr char kSnapshotMagic[8] = {'M', 'S', 'G', 'S', 'N', 'A', 'P', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated snapshot file");
  return value;
}

}  // namespace

uint64_t tensor_digest(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat32).contiguous();
  const auto* bytes = reinterpret_cast<const unsigned char*>(c.data_ptr<float>());
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < static_cast<size_t>(c.numel()) * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_snapshot(const fs::path& path, const Snapshot& snapshot) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write snapshot " + path.string());
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  write_le<int64_t>(out, snapshot.epoch);
  write_le<uint64_t>(out, snapshot.latent_digest);
  write_le<uint32_t>(out, static_cast<uint32_t>(snapshot.images.size()));
  for (const auto& [r, t] : snapshot.images) {
    auto c = t.detach().to(torch::kFloat32).contiguous();
    write_le<int64_t>(out, r);
    write_le<int64_t>(out, c.size(0));
    const float* data = c.data_ptr<float>();
    for (int64_t i = 0; i < c.numel(); ++i) {
      uint32_t bits = std::bit_cast<uint32_t>(data[i]);
      write_le<uint32_t>(out, bits);
    }
  }
  if (!out) throw std::runtime_error("failed writing snapshot " + path.string());
}

Snapshot read_snapshot(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read snapshot " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a snapshot file: " + path.string());
  }
  Snapshot s;
  s.epoch = read_le<int64_t>(in);
  s.latent_digest = read_le<uint64_t>(in);
  const auto count = read_le<uint32_t>(in);
  for (uint32_t k = 0; k < count; ++k) {
    const auto r = read_le<int64_t>(in);
    const auto batch = read_le<int64_t>(in);
    auto t = torch::empty({batch, 3, r, r}, torch::kFloat32);
    float* data = t.data_ptr<float>();
    for (int64_t i = 0; i < t.numel(); ++i) data[i] = std::bit_cast<float>(read_le<uint32_t>(in));
    s.images.set(r, t);
  }
  return s;
}

std::vector<Snapshot> read_snapshots(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("no snapshot directory at " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".snap") files.push_back(e.path());
  }
  std::vector<Snapshot> out;
  for (const auto& f : files) out.push_back(read_snapshot(f));
  std::sort(out.begin(), out.end(), [](const Snapshot& a, const Snapshot& b) { return a.epoch < b.epoch; });
  return out;
}

// ---- stability -------------------------------------------------------------

StabilityCurve stability_curve(std::span<const Snapshot> snapshots) {
  if (snapshots.size() < 2) {
    throw std::invalid_argument("stability: need >= 2 epochs of snapshots, found " +
                                std::to_string(snapshots.size()));
  }
  StabilityCurve curve;
  for (size_t k = 1; k < snapshots.size(); ++k) {
    const auto& prev = snapshots[k - 1];
    const auto& cur = snapshots[k];
    if (prev.latent_digest != cur.latent_digest) {
      throw std::invalid_argument("snapshots for epochs " + std::to_string(prev.epoch) + " and " +
                                  std::to_string(cur.epoch) + " use different latent sets");
    }
    if (prev.images.resolutions() != cur.images.resolutions()) {
      throw std::invalid_argument("snapshots cover different scales");
    }
    curve.epochs.push_back(cur.epoch);
    for (const auto& [r, t] : cur.images) {
      const auto& p = prev.images.at(r);
      if (!p.sizes().equals(t.sizes())) {
        throw std::invalid_argument("snapshot latent counts differ between epochs");
      }
      curve.mse[r].push_back((t.to(torch::kFloat64) - p.to(torch::kFloat64)).pow(2).mean().item<double>());
    }
  }
  return curve;
}

StabilityCurve stability_curve(const fs::path& snapshot_dir) {
  auto snapshots = read_snapshots(snapshot_dir);
  return stability_curve(std::span<const Snapshot>(snapshots));
}

double linear_fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit_slope needs two equally sized series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit_slope: x has zero variance");
  return sxy / sxx;
}

std::map<int64_t, double> final_third_slopes(const StabilityCurve& curve) {
  const size_t n = curve.epochs.size();
  const size_t begin = n - std::max<size_t>(2, n / 3);
  if (n < 2) throw std::invalid_argument("need >= 2 curve points for a trend");
  std::vector<double> x;
  for (size_t i = begin; i < n; ++i) x.push_back(static_cast<double>(curve.epochs[i]));
  std::map<int64_t, double> out;
  for (const auto& [r, values] : curve.mse) {
    std::vector<double> y(values.begin() + static_cast<std::ptrdiff_t>(begin), values.end());
    out[r] = linear_fit_slope(x, y);
  }
  return out;
}

namespace {

struct Canvas {
  int64_t width;
  int64_t height;
  std::vector<uint8_t> pixels;

  Canvas(int64_t w, int64_t h) : width(w), height(h), pixels(static_cast<size_t>(w * h * 3), 255) {}

  void put(int64_t x, int64_t y, const std::array<uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    std::memcpy(&pixels[static_cast<size_t>((y * width + x) * 3)], c.data(), 3);
  }

  void line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, const std::array<uint8_t, 3>& c) {
    const int64_t dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int64_t dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int64_t err = dx + dy;
    while (true) {
      put(x0, y0, c);
      put(x0, y0 + 1, c);
      if (x0 == x1 && y0 == y1) break;
      const int64_t e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

void render_plot(const StabilityCurve& curve, const fs::path& path) {
  constexpr int64_t kW = 800, kH = 480, kMargin = 40;
  Canvas canvas(kW, kH);
  const std::array<uint8_t, 3> axis = {0, 0, 0};
  canvas.line(kMargin, kH - kMargin, kW - kMargin, kH - kMargin, axis);
  canvas.line(kMargin, kMargin, kMargin, kH - kMargin, axis);

  double ymax = 0.0;
  for (const auto& [r, v] : curve.mse) ymax = std::max(ymax, *std::max_element(v.begin(), v.end()));
  if (ymax <= 0.0) ymax = 1.0;
  const double xmin = static_cast<double>(curve.epochs.front());
  const double xspan = std::max(1.0, static_cast<double>(curve.epochs.back()) - xmin);

  const std::array<std::array<uint8_t, 3>, 10> palette = {{{228, 26, 28},
                                                           {55, 126, 184},
                                                           {77, 175, 74},
                                                           {152, 78, 163},
                                                           {255, 127, 0},
                                                           {166, 86, 40},
                                                           {247, 129, 191},
                                                           {153, 153, 153},
                                                           {0, 0, 0},
                                                           {23, 190, 207}}};
  size_t colour = 0;
  for (const auto& [r, values] : curve.mse) {
    const auto& c = palette[colour++ % palette.size()];
    auto px = [&](size_t i) {
      return kMargin +
             static_cast<int64_t>((static_cast<double>(curve.epochs[i]) - xmin) / xspan * (kW - 2 * kMargin));
    };
    auto py = [&](size_t i) {
      return kH - kMargin - static_cast<int64_t>(values[i] / ymax * (kH - 2 * kMargin));
    };
    for (size_t i = 1; i < values.size(); ++i) canvas.line(px(i - 1), py(i - 1), px(i), py(i), c);
    if (values.size() == 1) canvas.put(px(0), py(0), c);
  }
  write_png(path, {kW, kH, std::move(canvas.pixels)});
}

}  // namespace

void write_stability_outputs(const StabilityCurve& curve, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "stability.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "stability.csv").string());
    csv << "epoch,scale,mse\n";
    csv.precision(17);
    for (size_t k = 0; k < curve.epochs.size(); ++k) {
      for (const auto& [r, values] : curve.mse) csv << curve.epochs[k] << "," << r << "," << values[k] << "\n";
    }
  }
  nlohmann::json meta;
  meta["pixel_range"] = "[0,1]";
  meta["mse"] = "mean over fixed latents, channels and pixels of (x_e - x_{e-1})^2";
  meta["plot"] = "stability.png";
  meta["plot_colours_in_scale_order"] = nlohmann::json::array();
  for (const auto& [r, v] : curve.mse) meta["plot_colours_in_scale_order"].push_back(r);
  std::ofstream(dir / "stability_meta.json", std::ios::trunc) << meta.dump(2) << "\n";
  render_plot(curve, dir / "stability.png");
}

}  // namespace msggan
