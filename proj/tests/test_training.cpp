#include <doctest.h>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "msggan/checkpoint.hpp"
#include "msggan/errors.hpp"
#include "msggan/experiments.hpp"
#include "msggan/training.hpp"
#include "support.hpp"

using namespace msggan;
using msggan::testing::scratch_dir;
using msggan::testing::tiny_config;
namespace fs = std::filesystem;

namespace {

RealBatch toy_batch(const ExperimentConfig& c, uint64_t seed) {
  auto ds = std::make_shared<const ImageDataset>(synthesize_toy_dataset({c.final_resolution, c.batch_size}, seed));
  std::vector<int64_t> schedule;
  for (int64_t r = 4; r <= c.final_resolution; r *= 2) schedule.push_back(r);
  BatchLoader loader(ds, c.batch_size, seed, schedule);
  return loader.batch(0, 0);
}

bool same_tensors(const TrainingState& a, const TrainingState& b) {
  auto ta = a.named_tensors(), tb = b.named_tensors();
  if (ta.size() != tb.size()) return false;
  for (const auto& [k, v] : ta) {
    if (!tb.contains(k) || !torch::equal(v, tb.at(k))) return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("init_training is seed-deterministic with 36 fixed latents") {
  auto c = tiny_config("unused");
  auto a = init_training(c), b = init_training(c), other = init_training(c, 1);
  CHECK(same_tensors(a, b));
  CHECK(!same_tensors(a, other));
  CHECK(a.fixed_eval_latents.size(0) == 36);
  CHECK(a.step == 0);
  CHECK(a.real_images_shown == 0);
  for (const auto& [k, v] : a.gen_optimizer->moments()) CHECK(v.abs().max().item<float>() == 0.0f);

  auto bad = c;
  bad.final_resolution = 12;
  CHECK_THROWS_AS(init_training(bad), ConfigError);
}

TEST_CASE("generator and discriminator share no parameters") {
  auto s = init_training(tiny_config("unused"));
  std::set<const void*> gen;
  for (const auto& p : s.generator->parameters()) gen.insert(p.data_ptr());
  for (const auto& p : s.discriminator->parameters()) CHECK(!gen.contains(p.data_ptr()));
}

TEST_CASE("train_step is deterministic and counts real images") {
  auto c = tiny_config("unused");
  auto a = init_training(c), b = init_training(c);
  const auto batch = toy_batch(c, 5);
  for (int i = 0; i < 3; ++i) {
    train_step(a, batch);
    train_step(b, batch);
  }
  CHECK(same_tensors(a, b));
  CHECK(a.step == 3);
  CHECK(a.real_images_shown == 3 * c.batch_size);
  CHECK(!same_tensors(a, init_training(c)));
}

TEST_CASE("lr = 0 leaves parameters unchanged but advances the counter") {
  auto c = tiny_config("unused");
  c.lr = 0.0;
  auto s = init_training(c);
  const auto before = init_training(c);
  train_step(s, toy_batch(c, 1));
  for (const auto& [k, v] : before.named_tensors()) {
    if (k.starts_with("gen.") || k.starts_with("disc.")) CHECK(torch::equal(v, s.named_tensors().at(k)));
  }
  CHECK(s.real_images_shown == c.batch_size);
}

TEST_CASE("every to-RGB head receives gradient under mode all") {
  auto c = tiny_config("unused");
  auto s = init_training(c);
  auto report = train_step(s, toy_batch(c, 2));
  CHECK(report.to_rgb_grad_norms.size() == 3);
  for (const auto& [r, n] : report.to_rgb_grad_norms) {
    CAPTURE(r);
    CHECK(n > 0.0);
  }
  CHECK(report.losses.per_scale_penalties.size() == 3);
}

TEST_CASE("mode none routes generator gradient through the top image only") {
  auto c = tiny_config("unused");
  c.connection_mode = ConnectionMode::none;
  auto s = init_training(c);
  auto report = train_step(s, toy_batch(c, 2));
  CHECK(report.to_rgb_grad_norms.at(16) > 0.0);
  CHECK(report.to_rgb_grad_norms.at(8) == 0.0);
  CHECK(report.to_rgb_grad_norms.at(4) == 0.0);
  CHECK(report.losses.per_scale_penalties.size() == 1);
}

TEST_CASE("train_step rejects malformed batches") {
  auto c = tiny_config("unused");
  auto s = init_training(c);
  RealBatch bad;
  bad.images = torch::zeros({4, 3, 8, 8});
  CHECK_THROWS_AS(train_step(s, bad), std::invalid_argument);
  CHECK(s.step == 0);
}

TEST_CASE("non-finite losses raise a divergence carrying the step") {
  auto c = tiny_config("unused");
  auto s = init_training(c);
  const auto batch = toy_batch(c, 3);
  train_step(s, batch);
  {
    torch::NoGradGuard no_grad;
    s.discriminator->named_parameters()["critic.bias"].fill_(std::numeric_limits<float>::quiet_NaN());
  }
  try {
    train_step(s, batch);
    FAIL("expected divergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.step() == 1);
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
  CHECK(s.step == 1);
}

TEST_CASE("checkpoint round trip is byte-identical and lossless") {
  auto c = tiny_config("unused");
  c.ema_beta = 0.9;
  auto s = init_training(c);
  train_step(s, toy_batch(c, 4));
  const auto bytes = serialize_checkpoint(s);
  auto back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(same_tensors(s, back));
  CHECK(back.step == s.step);
  CHECK(back.real_images_shown == s.real_images_shown);
  CHECK(back.fixed_eval_latents.size(0) == 36);

  auto bumped = bytes;
  bumped[8] = 2;
  CHECK_THROWS_AS(deserialize_checkpoint(bumped), CheckpointVersionError);
  auto garbage = bytes;
  garbage[0] = 'X';
  CHECK_THROWS(deserialize_checkpoint(garbage));
  auto truncated = std::vector<uint8_t>(bytes.begin(), bytes.end() - 4);
  CHECK_THROWS(deserialize_checkpoint(truncated));
}

TEST_CASE("budget 0 returns the initial checkpoint and an empty metric log") {
  const auto dir = scratch_dir("budget0");
  auto c = tiny_config(dir / "run");
  c.budget = 0;
  auto result = train(c);
  CHECK(result.step == 0);
  CHECK(result.rows.empty());
  CHECK(slurp(dir / "run" / "metrics.csv") == "step,real_images_shown,gen_loss,disc_loss,penalty,fid_proxy\n");
  auto state = load_checkpoint(dir / "run" / "checkpoints" / "final.ckpt");
  CHECK(same_tensors(state, init_training(c)));
  CHECK(fs::exists(dir / "run" / "config.json"));
  CHECK_THROWS_AS(train(c), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("toy run emits a snapshot per epoch, metric rows and grids") {
  const auto dir = scratch_dir("toyrun");
  auto c = tiny_config(dir / "run");
  c.budget = 256;  // four epochs of 64 images
  auto result = train(c);
  CHECK(result.real_images_shown == 256);
  CHECK(result.rows.size() == 4);
  CHECK(result.step * c.batch_size == result.real_images_shown);
  int snaps = 0;
  for (const auto& e : fs::directory_iterator(dir / "run" / "snapshots")) snaps += e.path().extension() == ".snap";
  CHECK(snaps == 4);
  CHECK(fs::exists(dir / "run" / "stability.csv"));
  CHECK(fs::exists(dir / "run" / "grids" / "final_scales.png"));
  CHECK(fs::exists(dir / "run" / "grad_norms.csv"));
  CHECK(result.final_fid_proxy.has_value());
  CHECK(result.initial_fid_proxy.has_value());
  fs::remove_all(dir);
}

TEST_CASE("fixed-seed runs are bit-reproducible and resume matches an uninterrupted run") {
  const auto dir = scratch_dir("resume");
  auto c = tiny_config(dir / "a");
  c.budget = 320;
  c.checkpoint_every = 64;
  train(c);
  auto again = c;
  again.out_dir = (dir / "b").string();
  train(again);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(same_tensors(load_checkpoint(dir / "a" / "checkpoints" / "final.ckpt"),
                     load_checkpoint(dir / "b" / "checkpoints" / "final.ckpt")));

  // Interrupt mid-epoch, then resume from the latest checkpoint.
  auto split = c;
  split.out_dir = (dir / "c").string();
  TrainOptions stop;
  stop.stop_after_images = 104;
  auto partial = train(split, stop);
  CHECK(partial.interrupted);
  CHECK(partial.real_images_shown == 104);
  TrainOptions resume;
  resume.resume = true;
  auto finished = train(split, resume);
  CHECK(finished.real_images_shown == 320);

  auto full = load_checkpoint(dir / "a" / "checkpoints" / "final.ckpt");
  auto resumed = load_checkpoint(dir / "c" / "checkpoints" / "final.ckpt");
  CHECK(same_tensors(full, resumed));
  CHECK(full.step == resumed.step);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "c" / "metrics.csv"));
  CHECK(slurp(dir / "a" / "stability.csv") == slurp(dir / "c" / "stability.csv"));
  fs::remove_all(dir);
}

TEST_CASE("lr sweep: single row, failures isolated") {
  const auto dir = scratch_dir("sweep");
  auto c = tiny_config(dir);
  c.budget = 64;
  auto one = lr_sweep(c, {0.003}, dir / "one");
  CHECK(one.size() == 1);
  CHECK(one[0].ok);

  fs::create_directories(dir / "two" / "lr_0.001");
  std::ofstream(dir / "two" / "lr_0.001" / "config.json") << "{}";
  auto two = lr_sweep(c, {0.001, 0.005}, dir / "two");
  REQUIRE(two.size() == 2);
  CHECK(!two[0].ok);
  CHECK(!two[0].error.empty());
  CHECK(two[1].ok);
  CHECK(std::isfinite(*two[1].final_fid_proxy));
  CHECK_THROWS_AS(lr_sweep(c, {}, dir / "none"), std::invalid_argument);

  // the usual sweep values are all valid
  for (double lr : {0.001, 0.003, 0.005, 0.01}) {
    auto cc = c;
    cc.lr = lr;
    CHECK_NOTHROW(cc.validate());
  }
  write_rows_csv(two, dir / "two" / "sweep.csv");
  CHECK(format_rows_table(two).find("failed") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("ablation deduplicates modes") {
  const auto dir = scratch_dir("ablate");
  auto c = tiny_config(dir);
  c.budget = 64;
  auto rows = ablate(c, {ConnectionMode::none, ConnectionMode::all, ConnectionMode::none}, dir / "runs");
  CHECK(rows.size() == 2);
  auto medians = median_by_mode(rows);
  CHECK(medians.size() == 2);
  for (const auto& [m, v] : medians) CHECK(v.has_value());
  fs::remove_all(dir);
}
