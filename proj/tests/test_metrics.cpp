#include <doctest.h>

#include <fstream>
#include <random>

#include "msggan/errors.hpp"
#include "msggan/evaluation.hpp"
#include "msggan/image_io.hpp"
#include "msggan/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace msggan;

namespace {

FeatureStats random_stats(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(rng);
  FeatureStats s;
  s.cov = a * a.transpose() / d;
  s.mean = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) s.mean(i) = n(rng);
  return s;
}

}  // namespace

TEST_CASE("feature stats: mean and unbiased covariance") {
  Eigen::MatrixXd two(2, 1);
  two << 0.0, 2.0;
  auto s = feature_stats(two);
  CHECK(s.mean(0) == doctest::Approx(1.0));
  CHECK(s.cov(0, 0) == doctest::Approx(2.0));

  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 0.7);
  CHECK(feature_stats(same).cov.isZero(0.0));

  CHECK_THROWS_AS(feature_stats(Eigen::MatrixXd(1, 3)), std::invalid_argument);

  torch::manual_seed(0);
  auto big = feature_stats(torch::randn({10000, 4}, torch::kFloat64));
  CHECK(big.mean.cwiseAbs().maxCoeff() < 0.1);
  CHECK((big.cov - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.1);
  CHECK((big.cov - big.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("frechet distance matches the eigendecomposition oracle") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 100; ++i) {
    auto a = random_stats(rng, 8), b = random_stats(rng, 8);
    const double d = frechet_distance(a, b);
    CHECK(std::abs(d - oracle::frechet_distance(a, b)) < 1e-6);
    CHECK(std::abs(d - frechet_distance(b, a)) < 1e-9);
    CHECK(d >= 0.0);
  }
}

TEST_CASE("frechet distance analytic cases") {
  std::mt19937_64 rng(5);
  auto a = random_stats(rng, 6);
  CHECK(std::abs(frechet_distance(a, a)) <= 1e-9);
  FeatureStats i1{Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4)};
  FeatureStats i2{Eigen::VectorXd::LinSpaced(4, 1.0, 4.0), Eigen::MatrixXd::Identity(4, 4)};
  CHECK(std::abs(frechet_distance(i1, i2) - 30.0) <= 1e-9);
}

TEST_CASE("frechet distance errors") {
  FeatureStats a{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  FeatureStats b{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
  FeatureStats bad = a;
  bad.cov(0, 0) = -1.0;
  CHECK_THROWS_AS(frechet_distance(bad, a), NumericError);
}

TEST_CASE("inception score extremes are exact") {
  const int c = 10;
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(100, c, 1.0 / c);
  auto u = inception_score(uniform, 10);
  CHECK(u.mean == 1.0);
  CHECK(u.stddev == 0.0);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(100, c);
  for (int i = 0; i < 100; ++i) onehot(i, i % c) = 1.0;
  auto o = inception_score(onehot, 10);
  CHECK(o.mean == static_cast<double>(c));
  CHECK(o.stddev == 0.0);
}

TEST_CASE("inception score matches direct summation") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Eigen::MatrixXd p(30, 5);
  for (int i = 0; i < 30; ++i) {
    for (int k = 0; k < 5; ++k) p(i, k) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  const auto scores = oracle::inception_split_scores(p, 3);
  double mean = 0, var = 0;
  for (double s : scores) mean += s / 3;
  for (double s : scores) var += (s - mean) * (s - mean) / 3;
  auto is = inception_score(p, 3);
  CHECK(std::abs(is.mean - mean) < 1e-9);
  CHECK(std::abs(is.stddev - std::sqrt(var)) < 1e-9);
  CHECK(is.mean >= 1.0);
  CHECK(is.mean <= 5.0);
}

TEST_CASE("inception score rejects non-stochastic rows") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(4, 2, 0.4);
  CHECK_THROWS_AS(inception_score(p, 1), std::invalid_argument);
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(4, 2, 0.5);
  CHECK_THROWS_AS(inception_score(q, 5), std::invalid_argument);
}

TEST_CASE("random projection extractor: fixed, shaped, and stochastic rows") {
  RandomProjectionExtractor a, b;
  auto x = torch::rand({6, 3, 16, 16}) * 2 - 1;
  auto fa = a.features(x);
  CHECK(fa.sizes() == torch::IntArrayRef({6, a.dim()}));
  CHECK(torch::equal(fa, b.features(x)));
  auto p = a.probabilities(x);
  CHECK(p.size(1) == a.classes());
  CHECK(torch::allclose(p.sum(1), torch::ones({6}), 1e-5, 1e-5));
  CHECK(a.features(torch::rand({2, 3, 64, 64})).size(1) == a.dim());
}

TEST_CASE("stability curve: analytic cases and errors") {
  auto make = [](int64_t epoch, float v, uint64_t digest = 1) {
    Snapshot s;
    s.epoch = epoch;
    s.latent_digest = digest;
    s.images.set(4, torch::full({36, 3, 4, 4}, v));
    s.images.set(8, torch::full({36, 3, 8, 8}, v));
    return s;
  };
  std::vector<Snapshot> same = {make(0, 0.3f), make(1, 0.3f)};
  auto c0 = stability_curve(std::span<const Snapshot>(same));
  CHECK(c0.mse.at(4).at(0) == 0.0);
  CHECK(c0.mse.at(8).at(0) == 0.0);

  std::vector<Snapshot> shifted = {make(0, 0.2f), make(1, 0.3f)};
  auto c1 = stability_curve(std::span<const Snapshot>(shifted));
  CHECK(c1.mse.at(8).at(0) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(c1.epochs == std::vector<int64_t>{1});

  std::vector<Snapshot> one = {make(0, 0.2f)};
  try {
    stability_curve(std::span<const Snapshot>(one));
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("need >= 2 epochs") != std::string::npos);
  }
  std::vector<Snapshot> mixed = {make(0, 0.2f, 1), make(1, 0.2f, 2)};
  CHECK_THROWS_AS(stability_curve(std::span<const Snapshot>(mixed)), std::invalid_argument);
}

TEST_CASE("snapshots round-trip and stability outputs are written") {
  const auto dir = msggan::testing::scratch_dir("snap");
  for (int e = 0; e < 4; ++e) {
    Snapshot s;
    s.epoch = e;
    s.latent_digest = 99;
    s.images.set(4, torch::rand({36, 3, 4, 4}));
    write_snapshot(dir / ("e" + std::to_string(e) + ".snap"), s);
    auto back = read_snapshot(dir / ("e" + std::to_string(e) + ".snap"));
    CHECK(back.epoch == e);
    CHECK(back.latent_digest == 99);
    CHECK(torch::equal(back.images.at(4), s.images.at(4)));
  }
  auto curve = stability_curve(dir);
  CHECK(curve.epochs == std::vector<int64_t>{1, 2, 3});
  write_stability_outputs(curve, dir / "out");
  CHECK(std::filesystem::exists(dir / "out" / "stability.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "stability.png"));
  CHECK(std::filesystem::exists(dir / "out" / "stability_meta.json"));
  std::ifstream csv(dir / "out" / "stability.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,scale,mse");
  std::filesystem::remove_all(dir);
}

TEST_CASE("linear fit slope") {
  std::vector<double> x = {1, 2, 3, 4}, y = {3, 5, 7, 9};
  CHECK(linear_fit_slope(x, y) == doctest::Approx(2.0));
  std::vector<double> flat = {1, 1, 1, 1};
  CHECK_THROWS_AS(linear_fit_slope(flat, y), std::invalid_argument);

  StabilityCurve c;
  c.epochs = {1, 2, 3, 4, 5, 6};
  c.mse[4] = {9, 8, 7, 3, 2, 1};
  CHECK(final_third_slopes(c).at(4) == doctest::Approx(-1.0));
}

TEST_CASE("sample grids: layout and byte-determinism") {
  ArchitectureOptions o;
  o.final_resolution = 32;
  o.latent_dim = 16;
  o.width_divisor = 64;
  Generator g(resolve_architecture(o));
  auto gen = at::detail::createCPUGenerator(4);
  g->reset_parameters(gen);
  const auto dir = msggan::testing::scratch_dir("grid");

  auto one = sample_latent(1, 16, gen);
  write_grids(g, one, dir, "one");
  auto img = read_image(dir / "one_scales.png");
  CHECK(img.width == 4 * 32);
  CHECK(img.height == 32);

  auto many = sample_latent(36, 16, gen);
  write_grids(g, many, dir, "a");
  write_grids(g, many, dir, "b");
  auto grid = read_image(dir / "a_scales.png");
  CHECK(grid.height == 36 * 32);
  auto top = read_image(dir / "a_top.png");
  CHECK(top.width == 6 * 32);
  CHECK(top.height == 6 * 32);
  std::ifstream fa(dir / "a_scales.png", std::ios::binary), fb(dir / "b_scales.png", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  CHECK(sa == sb);

  // The 4x4 column is a nearest-neighbour blow-up: every 8x8 tile is flat.
  auto tiles = generate(g, one);
  auto col4 = quantize_u8(tiles.at(4));
  auto pix = image_to_tensor(img);
  CHECK(pix[0][0][0].item<uint8_t>() == col4[0][0][0][0].item<uint8_t>());
  CHECK(pix[0][7][7].item<uint8_t>() == col4[0][0][0][0].item<uint8_t>());
  std::filesystem::remove_all(dir);
}

TEST_CASE("fid proxy of a dataset against itself is near zero") {
  auto a = synthesize_toy_dataset({16, 64}, 1);
  RandomProjectionExtractor ex;
  auto s = feature_stats(ex.features(a.images(0, 64)));
  CHECK(frechet_distance(s, s) < 1e-9);
}
